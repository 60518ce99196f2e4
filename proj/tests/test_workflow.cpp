#include <doctest.h>

#include <numbers>
#include <random>

#include "castflow/adapters.hpp"
#include "castflow/workflow.hpp"
#include "oracles.hpp"
#include "test_adapters.hpp"
#include "test_util.hpp"

using namespace castflow;
using namespace castflow::workflow;

namespace {

struct WorkflowFixture {
    TimeSeries series;
    ChannelRoles roles;
    pool::ModelPool model_pool;
    pool::CaseLibrary library;
    std::vector<Window> windows;

    WorkflowFixture() {
        std::mt19937_64 rng(71);
        std::normal_distribution<double> noise(0.0, 0.3);
        Matrix values(360, 2);
        for (std::size_t t = 0; t < 360; ++t) {
            values(t, 0) = 20.0 +
                           5.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 12.0) +
                           0.01 * static_cast<double>(t) + noise(rng);
            values(t, 1) = t > 0 ? values(t - 1, 0) + noise(rng) : values(t, 0);
        }
        series = testutil::series_from(values, 0, {1});
        roles = series.roles();
        pool::PoolModelConfig cfg;
        cfg.seasonal_period = 12;
        cfg.moving_average_q = 6;
        cfg.ar_order = 2;
        model_pool = pool::make_pool(
            {"naive", "seasonal_naive", "linear_trend", "moving_average"}, cfg);
        library = pool::build_case_library(series, 24, 8, 12, 2, model_pool, 7, 1);
        windows = make_windows(series, 24, 8, 12, true);
    }

    RunInputs inputs() const {
        RunInputs in;
        in.library = &library;
        in.pool = &model_pool;
        return in;
    }

    WorkflowConfig config(toolkit::Mode mode = toolkit::Mode::test, Arch arch = Arch::full) const {
        WorkflowConfig c;
        c.mode = mode;
        c.arch = arch;
        return c;
    }
};

}  // namespace

TEST_SUITE("workflow") {

TEST_CASE("workflow state: baseline starts empty, history grows monotonically") {
    WorkflowState state;
    CHECK(!state.baseline.has_value());
    CHECK(state.step_index == 0);
    state.observe("first");
    state.observe("second");
    CHECK(state.history == std::vector<std::string>{"first", "second"});
    CHECK(state.step_index == 2);
}

TEST_CASE("default schedule respects mode and covariates") {
    auto with_cov = oracle::roles_for(2);
    auto train = default_schedule(with_cov, toolkit::Mode::train);
    CHECK(train.contains(toolkit::ToolId::autoregressive_residual));
    CHECK(train.contains(toolkit::ToolId::cross_channel));
    CHECK_NOTHROW(train.validate(toolkit::Mode::train));

    auto test = default_schedule(with_cov, toolkit::Mode::test);
    CHECK(!test.contains(toolkit::ToolId::autoregressive_residual));
    CHECK_NOTHROW(test.validate(toolkit::Mode::test));

    auto no_cov = default_schedule(oracle::roles_for(1), toolkit::Mode::test);
    CHECK(!no_cov.contains(toolkit::ToolId::cross_channel));
}

TEST_CASE("sanitize_schedule dedupes, restores mandatory, drops residual in test") {
    memory::ToolSchedule messy;
    messy.mandatory = {};
    messy.optional_tools = {toolkit::ToolId::trend_analysis, toolkit::ToolId::trend_analysis,
                            toolkit::ToolId::autoregressive_residual,
                            toolkit::ToolId::model_auxiliary};
    auto clean = sanitize_schedule(messy, toolkit::Mode::test);
    CHECK_NOTHROW(clean.validate(toolkit::Mode::test));
    CHECK(clean.optional_tools ==
          std::vector<toolkit::ToolId>{toolkit::ToolId::trend_analysis});

    auto train_clean = sanitize_schedule(messy, toolkit::Mode::train);
    CHECK(train_clean.contains(toolkit::ToolId::autoregressive_residual));
}

TEST_CASE("schedule validation rejects duplicates and train-only leaks") {
    memory::ToolSchedule s;
    s.mandatory = {toolkit::ToolId::model_auxiliary, toolkit::ToolId::exogenous_analysis};
    s.optional_tools = {toolkit::ToolId::trend_analysis, toolkit::ToolId::trend_analysis};
    CHECK_THROWS_AS(s.validate(toolkit::Mode::test), WorkflowError);

    s.optional_tools = {toolkit::ToolId::autoregressive_residual};
    CHECK_THROWS_AS(s.validate(toolkit::Mode::test), WorkflowError);
    CHECK_NOTHROW(s.validate(toolkit::Mode::train));
}

TEST_CASE("execute_actions populates slots exactly for scheduled tools") {
    WorkflowFixture fx;
    const auto& w = fx.windows[5];

    memory::ToolSchedule mandatory_only;
    mandatory_only.mandatory = {toolkit::ToolId::model_auxiliary,
                                toolkit::ToolId::exogenous_analysis};
    auto result = execute_actions(mandatory_only, w, fx.roles, &fx.library, &fx.model_pool,
                                  toolkit::ToolkitParams{}, toolkit::Mode::test);
    CHECK(result.baseline.has_value());
    CHECK(result.evidence.baseline.has_value());
    CHECK(result.evidence.exogenous.has_value());
    CHECK(!result.evidence.trend.has_value());
    CHECK(!result.evidence.state.has_value());

    // slot populated iff an ok invocation exists
    for (auto id : toolkit::all_tools()) {
        bool ok_invocation = false;
        for (const auto& inv : result.evidence.tool_invocations)
            if (inv.tool == id && inv.status == memory::ToolInvocation::Status::ok)
                ok_invocation = true;
        CHECK(result.evidence.slot_populated(id) == ok_invocation);
    }
}

TEST_CASE("execute_actions bypasses the residual tool in test mode") {
    WorkflowFixture fx;
    memory::ToolSchedule schedule = default_schedule(fx.roles, toolkit::Mode::train);
    // inject the residual tool into a test-mode execution directly
    auto result = execute_actions(schedule, fx.windows[2], fx.roles, &fx.library, &fx.model_pool,
                                  toolkit::ToolkitParams{}, toolkit::Mode::test);
    CHECK(!result.evidence.residual.has_value());
    bool bypass_recorded = false;
    for (const auto& inv : result.evidence.tool_invocations)
        if (inv.tool == toolkit::ToolId::autoregressive_residual &&
            inv.status == memory::ToolInvocation::Status::bypassed)
            bypass_recorded = true;
    CHECK(bypass_recorded);
}

TEST_CASE("execute_actions records tool failures and keeps going") {
    WorkflowFixture fx;
    Window tiny;
    tiny.L = 6;
    tiny.H = 2;
    tiny.lookback = Matrix(6, 2, 1.0);
    for (std::size_t r = 0; r < 6; ++r) tiny.lookback(r, 0) = static_cast<double>(r);
    tiny.origin_index = 5;

    memory::ToolSchedule schedule;
    schedule.mandatory = {toolkit::ToolId::model_auxiliary, toolkit::ToolId::exogenous_analysis};
    schedule.optional_tools = {toolkit::ToolId::cross_channel, toolkit::ToolId::trend_analysis};
    toolkit::ToolkitParams params;
    params.max_lag = 10;  // forces cross_channel's length precondition to fail

    auto result = execute_actions(schedule, tiny, fx.roles, &fx.library, &fx.model_pool, params,
                                  toolkit::Mode::test);
    bool cross_failed = false;
    for (const auto& inv : result.evidence.tool_invocations)
        if (inv.tool == toolkit::ToolId::cross_channel)
            cross_failed = inv.status == memory::ToolInvocation::Status::failed;
    CHECK(cross_failed);
    CHECK(!result.evidence.cross_channel.has_value());
    CHECK(result.evidence.trend.has_value());  // later tools still ran
}

TEST_CASE("all tools scheduled in train mode populate every slot") {
    WorkflowFixture fx;
    memory::ToolSchedule everything;
    everything.mandatory = {toolkit::ToolId::model_auxiliary, toolkit::ToolId::exogenous_analysis};
    for (auto id : toolkit::all_tools())
        if (!everything.contains(id)) everything.optional_tools.push_back(id);
    auto result = execute_actions(everything, fx.windows[4], fx.roles, &fx.library, &fx.model_pool,
                                  toolkit::ToolkitParams{}, toolkit::Mode::train);
    for (auto id : toolkit::all_tools()) CHECK(result.evidence.slot_populated(id));
}

TEST_CASE("candidate parser accepts the fenced grammar") {
    std::string error;
    auto ok = parse_candidate("reasoning first\n```\n1.5\n2.5\n3.5\n```\n", 3, &error);
    REQUIRE(ok.has_value());
    CHECK((*ok)(0, 0) == 1.5);
    CHECK((*ok)(2, 0) == 3.5);

    auto short_block = parse_candidate("```\n1\n2\n```\n", 3, &error);
    CHECK(!short_block.has_value());
    CHECK(error.find("expected 3") != std::string::npos);

    auto garbage = parse_candidate("```\none,two\n```\n", 2, &error);
    CHECK(!garbage.has_value());

    auto none = parse_candidate("no numbers here", 2, &error);
    CHECK(!none.has_value());
}

TEST_CASE("candidate parser accepts the JSON alternate encoding") {
    std::string error;
    auto ok = parse_candidate(R"(thoughts... {"values": [4.0, 5.0, 6.0]})", 3, &error);
    REQUIRE(ok.has_value());
    CHECK((*ok)(1, 0) == 5.0);

    auto nested = parse_candidate(R"({"values": [[1.0], [2.0]]})", 2, &error);
    REQUIRE(nested.has_value());
    CHECK((*nested)(1, 0) == 2.0);

    auto wrong_len = parse_candidate(R"({"values": [1.0, 2.0]})", 3, &error);
    CHECK(!wrong_len.has_value());
}

TEST_CASE("teacher transcript fixture parses to 24 values") {
    const std::string transcript =
        read_text_file(std::string(CASTFLOW_TEST_FIXTURES) + "/teacher_transcript_h24.txt");
    std::string error;
    auto parsed = parse_candidate(transcript, 24, &error);
    REQUIRE(parsed.has_value());
    CHECK(parsed->rows() == 24);
    CHECK((*parsed)(0, 0) == doctest::Approx(41.2));
    CHECK((*parsed)(23, 0) == doctest::Approx(42.9));
}

TEST_CASE("reflection: format gate") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    auto evidence = execute_actions(default_schedule(fx.roles, toolkit::Mode::test), fx.windows[1],
                                    fx.roles, &fx.library, &fx.model_pool,
                                    toolkit::ToolkitParams{}, toolkit::Mode::test)
                        .evidence;

    // 23 values when H = 24: format fails, v = 0
    std::string error;
    auto candidate = parse_candidate(testutil::fenced_response(23, 1.0), 24, &error);
    auto verdict = reflect(candidate, "short", error, evidence, fx.roles, 24, 3.0, adapter, nullptr);
    CHECK(verdict.format_ok == false);
    CHECK(verdict.v == 0);
    CHECK(!verdict.feedback.empty());
}

TEST_CASE("reflection: logic bounds catch far-out candidates and name the bound") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    const auto& w = fx.windows[3];
    auto evidence = execute_actions(default_schedule(fx.roles, toolkit::Mode::test), w, fx.roles,
                                    &fx.library, &fx.model_pool, toolkit::ToolkitParams{},
                                    toolkit::Mode::test)
                        .evidence;

    // in-bounds candidate: the baseline itself
    std::optional<Matrix> good = evidence.baseline->values;
    auto ok = reflect(good, "baseline echo", "", evidence, fx.roles, w.H, 3.0, adapter, nullptr);
    CHECK(ok.v == 1);

    // absurdly distant candidate: logic fails with the bound in the feedback
    std::optional<Matrix> bad = Matrix(w.H, 1, 1e7);
    auto rejected = reflect(bad, "wild", "", evidence, fx.roles, w.H, 3.0, adapter, nullptr);
    CHECK(rejected.format_ok == true);
    CHECK(rejected.logic_ok == false);
    CHECK(rejected.v == 0);
    CHECK(rejected.feedback.find("bounds") != std::string::npos);
}

TEST_CASE("fallback forecast is the lookback target mean") {
    Window w;
    w.L = 4;
    w.H = 4;
    w.lookback = Matrix::column({10.0, 15.0, 10.0, 15.0});
    w.origin_index = 3;
    auto f = fallback_forecast(w, 4, 0);
    CHECK(f.produced_by == Provenance::fallback);
    for (std::size_t h = 0; h < 4; ++h) CHECK(f.values(h, 0) == 12.5);

    Window constant;
    constant.L = 3;
    constant.H = 2;
    constant.lookback = Matrix::column({7, 7, 7});
    auto fc = fallback_forecast(constant, 2, 0);
    CHECK(fc.values(0, 0) == 7.0);

    auto xs = oracle::noisy_series(30, 72);
    Window seeded;
    seeded.L = 30;
    seeded.H = 5;
    seeded.lookback = Matrix::column(xs);
    double mean = 0;
    for (double v : xs) mean += v;
    mean /= 30.0;
    CHECK(fallback_forecast(seeded, 5, 0).values(2, 0) == doctest::Approx(mean).epsilon(1e-12));

    Window missing;
    missing.L = 3;
    missing.H = 2;
    missing.lookback = Matrix::column({std::nan(""), std::nan(""), std::nan("")});
    CHECK_THROWS_AS(fallback_forecast(missing, 2, 0), WorkflowError);
}

TEST_CASE("refinement decomposition identity") {
    Matrix y = Matrix::column({1, 2, 3});
    Matrix base = Matrix::column({1.5, 1.5, 2.5});

    auto zero = refinement_decomposition(y, base, base);
    CHECK(zero.first == 0.0);
    CHECK(zero.second == 0.0);

    auto perfect = refinement_decomposition(y, base, y);
    const double base_err = 0.25 + 0.25 + 0.25;
    CHECK(perfect.first == doctest::Approx(-base_err).epsilon(1e-12));
    CHECK(perfect.second == doctest::Approx(perfect.first).epsilon(1e-12));

    std::mt19937_64 rng(73);
    std::normal_distribution<double> d(0.0, 4.0);
    for (int trial = 0; trial < 300; ++trial) {
        Matrix truth(6, 1), b(6, 1), refined(6, 1);
        for (std::size_t r = 0; r < 6; ++r) {
            truth(r, 0) = d(rng);
            b(r, 0) = d(rng);
            refined(r, 0) = d(rng);
        }
        auto [lhs, rhs] = refinement_decomposition(truth, b, refined);
        CHECK(std::abs(lhs - rhs) < 1e-9);
    }

    CHECK_THROWS_AS(refinement_decomposition(y, base, Matrix(2, 1)), MetricError);
}

TEST_CASE("happy path: mock adapter accepts on attempt one") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    auto result = run_forecast(fx.windows[6], fx.roles, fx.inputs(), adapter, fx.config());
    CHECK(result.trajectory.fallback == false);
    CHECK(result.trajectory.attempts.size() == 1);
    CHECK(result.trajectory.attempts[0].verdict.v == 1);
    CHECK(result.forecast.produced_by == Provenance::refined);
    CHECK(result.forecast.values.rows() == 8);

    // mock candidates stay inside the quality clipping bounds
    const auto bounds = result.trajectory.evidence.clip_bounds(fx.roles.target);
    REQUIRE(bounds.has_value());
    for (std::size_t h = 0; h < result.forecast.values.rows(); ++h) {
        CHECK(result.forecast.values(h, 0) >= bounds->first);
        CHECK(result.forecast.values(h, 0) <= bounds->second);
    }
}

TEST_CASE("planning succeeds on an empty retrieval result and surfaces retrieved strategies") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;

    // cold start: no entries retrieved, the default rule schedule applies
    memory::RetrievalResult empty;
    PlanRequest req;
    req.window = &fx.windows[0];
    req.roles = fx.roles;
    req.mode = toolkit::Mode::test;
    req.retrieved = &empty;
    auto planned = adapter.plan(req);
    CHECK(planned.to_prompt_line() ==
          default_schedule(fx.roles, toolkit::Mode::test).to_prompt_line());

    // a retrieved entry's schedule appears in the planner context verbatim
    memory::MemoryEntry entry;
    entry.id = 42;
    entry.lookback = fx.windows[0].lookback;
    entry.schedule.mandatory = {toolkit::ToolId::model_auxiliary,
                                toolkit::ToolId::exogenous_analysis};
    entry.schedule.optional_tools = {toolkit::ToolId::event_summary};
    entry.achieved_mse = 0.75;
    memory::RetrievalResult retrieved;
    retrieved.entries.push_back(memory::ScoredEntry{&entry, 0.9});
    const std::string context =
        build_plan_context(fx.windows[0], fx.roles, retrieved, {}, toolkit::Mode::test);
    CHECK(context.find(entry.schedule.to_prompt_line()) != std::string::npos);
    CHECK(context.find("entry=42") != std::string::npos);
}

TEST_CASE("always-invalid stub exhausts exactly C_max attempts then falls back") {
    WorkflowFixture fx;
    testutil::ScriptedAdapter adapter;
    for (int i = 0; i < 10; ++i)
        adapter.responses.push_back(testutil::fenced_response(1, 5.0));  // always 1 short value

    auto config = fx.config();
    config.C_max = 3;
    const auto& w = fx.windows[2];
    auto result = run_forecast(w, fx.roles, fx.inputs(), adapter, config);

    CHECK(result.trajectory.attempts.size() == 3);
    CHECK(result.trajectory.fallback == true);
    CHECK(result.forecast.produced_by == Provenance::fallback);
    for (const auto& attempt : result.trajectory.attempts) CHECK(attempt.verdict.v == 0);

    // fallback vector equals the lookback target mean to 1e-12
    double mean = 0;
    for (std::size_t r = 0; r < w.L; ++r) mean += w.lookback(r, 0);
    mean /= static_cast<double>(w.L);
    for (std::size_t h = 0; h < w.H; ++h)
        CHECK(std::abs(result.forecast.values(h, 0) - mean) < 1e-12);
}

TEST_CASE("fail-once-then-succeed records exactly two attempts") {
    WorkflowFixture fx;
    testutil::ScriptedAdapter adapter;
    adapter.responses.push_back(testutil::fenced_response(1, 5.0));  // attempt 1: bad length
    const double accepted_value = fx.windows[2].lookback(23, 0);
    adapter.responses.push_back(testutil::fenced_response(8, accepted_value));  // attempt 2

    auto result = run_forecast(fx.windows[2], fx.roles, fx.inputs(), adapter, fx.config());
    CHECK(result.trajectory.attempts.size() == 2);
    CHECK(result.trajectory.fallback == false);
    CHECK(result.trajectory.attempts[0].verdict.v == 0);
    CHECK(result.trajectory.attempts[1].verdict.v == 1);
    for (std::size_t h = 0; h < 8; ++h)
        CHECK(result.forecast.values(h, 0) == accepted_value);
}

TEST_CASE("retry bound holds against adversarial verdicts") {
    WorkflowFixture fx;
    for (std::size_t c_max : {1u, 2u, 4u}) {
        testutil::ScriptedAdapter adapter;
        for (int i = 0; i < 20; ++i)
            adapter.verdicts.push_back({false, "scripted rejection"});
        auto config = fx.config();
        config.C_max = c_max;
        auto result = run_forecast(fx.windows[1], fx.roles, fx.inputs(), adapter, config);
        CHECK(result.trajectory.attempts.size() == c_max);
        CHECK(result.trajectory.fallback == true);
    }
}

TEST_CASE("accepted forecasts always carry v = 1") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    for (const auto& w : fx.windows) {
        auto result = run_forecast(w, fx.roles, fx.inputs(), adapter, fx.config());
        if (!result.trajectory.fallback) {
            REQUIRE(!result.trajectory.attempts.empty());
            CHECK(result.trajectory.attempts.back().verdict.format_ok);
            CHECK(result.trajectory.attempts.back().verdict.logic_ok);
        }
    }
}

TEST_CASE("anchorer-only: zero policy calls, baseline is final") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    auto result = run_forecast(fx.windows[3], fx.roles, fx.inputs(), adapter,
                               fx.config(toolkit::Mode::test, Arch::anchorer_only));
    CHECK(result.trajectory.policy_calls == 0);
    CHECK(result.trajectory.attempts.empty());
    CHECK(result.forecast.produced_by == Provenance::baseline);
    REQUIRE(result.trajectory.baseline.has_value());
    CHECK(bitwise_equal(result.forecast.values, result.trajectory.baseline->values));
}

TEST_CASE("agent-only: the forecaster context omits the ensemble baseline") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    auto result = run_forecast(fx.windows[3], fx.roles, fx.inputs(), adapter,
                               fx.config(toolkit::Mode::test, Arch::agent_only));
    REQUIRE(!result.trajectory.attempts.empty());
    CHECK(result.trajectory.attempts[0].context.find("[model_auxiliary]") == std::string::npos);

    auto full = run_forecast(fx.windows[3], fx.roles, fx.inputs(), adapter, fx.config());
    CHECK(full.trajectory.attempts[0].context.find("[model_auxiliary]") != std::string::npos);
}

TEST_CASE("test-mode runs are leakage-free end to end") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    Window clean = fx.windows[4];
    Window dirty = clean;
    dirty.future = Matrix(clean.H, clean.lookback.cols(), 123456.0);

    auto a = run_forecast(clean, fx.roles, fx.inputs(), adapter, fx.config());
    auto b = run_forecast(dirty, fx.roles, fx.inputs(), adapter, fx.config());
    CHECK(a.trajectory.to_json().dump() == b.trajectory.to_json().dump());
    CHECK(bitwise_equal(a.forecast.values, b.forecast.values));
}

TEST_CASE("test-mode trajectories never contain a residual report") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    for (const auto& w : fx.windows) {
        auto result = run_forecast(w, fx.roles, fx.inputs(), adapter, fx.config());
        CHECK(!result.trajectory.evidence.residual.has_value());
        for (const auto& attempt : result.trajectory.attempts)
            CHECK(!attempt.schedule.contains(toolkit::ToolId::autoregressive_residual));
    }
}

TEST_CASE("train-mode runs do use the residual diagnoser") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    auto result = run_forecast(fx.windows[0], fx.roles, fx.inputs(), adapter,
                               fx.config(toolkit::Mode::train));
    CHECK(result.trajectory.evidence.residual.has_value());
}

TEST_CASE("mock runs are reproducible byte for byte") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    auto a = run_forecast(fx.windows[5], fx.roles, fx.inputs(), adapter, fx.config());
    auto b = run_forecast(fx.windows[5], fx.roles, fx.inputs(), adapter, fx.config());
    CHECK(a.trajectory.to_json().dump() == b.trajectory.to_json().dump());
}

TEST_CASE("hard failures surface as WorkflowRunError with a partial trajectory") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    Window bad;
    bad.L = 24;
    bad.H = 8;
    bad.lookback = Matrix(24, 2, std::nan(""));  // unforecastable everywhere
    bad.origin_index = 23;
    auto config = fx.config();
    config.C_max = 1;
    // every tool and model fails on all-NaN input, the mock refuses to
    // fabricate numbers, and the fallback has no mean to impute
    try {
        run_forecast(bad, fx.roles, fx.inputs(), adapter, config);
        FAIL("expected WorkflowRunError");
    } catch (const WorkflowRunError& e) {
        CHECK(!e.partial.steps.empty());
        CHECK(!e.partial.attempts.empty());
    }
}

TEST_CASE("debug transcripts capture verbatim request and response bodies") {
    WorkflowFixture fx;
    adapters::MockPolicyAdapter adapter;
    auto config = fx.config();
    config.debug_transcripts = true;
    auto result = run_forecast(fx.windows[1], fx.roles, fx.inputs(), adapter, config);
    CHECK(!result.trajectory.transcripts.empty());
    bool has_forecast_request = false;
    for (const auto& t : result.trajectory.transcripts)
        if (t.rfind("FORECAST REQUEST", 0) == 0) has_forecast_request = true;
    CHECK(has_forecast_request);

    auto quiet = run_forecast(fx.windows[1], fx.roles, fx.inputs(), adapter, fx.config());
    CHECK(quiet.trajectory.transcripts.empty());
}

TEST_CASE("mock forecaster with flat evidence echoes the baseline exactly") {
    // A constant history gives slope exactly 0 and no changepoints; with a
    // single-model pool the ensemble weight is exactly 1, so the candidate
    // must round-trip to the baseline bits through the response text.
    std::vector<double> flat(120, 50.0);
    auto series = testutil::series_from_column(flat);
    auto model_pool = pool::make_pool({"naive"}, pool::PoolModelConfig{});
    auto library = pool::build_case_library(series, 24, 8, 8, 1, model_pool, 7, 1);
    auto windows = make_windows(series, 24, 8, 8, true);

    adapters::MockPolicyAdapter adapter;
    RunInputs inputs;
    inputs.library = &library;
    inputs.pool = &model_pool;
    WorkflowConfig config;
    config.mode = toolkit::Mode::test;

    auto result = run_forecast(windows[0], series.roles(), inputs, adapter, config);
    REQUIRE(result.trajectory.baseline.has_value());
    CHECK(bitwise_equal(result.forecast.values, result.trajectory.baseline->values));
}

}  // TEST_SUITE
