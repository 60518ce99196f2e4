#include "castflow/config.hpp"

#include <set>

namespace castflow::cli {

namespace {

void require_known_keys(const ojson& section, const std::string& name,
                        const std::set<std::string>& known) {
    for (const auto& [key, value] : section.items()) {
        (void)value;
        if (!known.count(key))
            throw ConfigError("config section '" + name + "': unknown key '" + key + "'");
    }
}

template <typename T>
T get_or(const ojson& section, const std::string& key, T fallback) {
    if (!section.contains(key) || section.at(key).is_null()) return fallback;
    return section.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const ojson& j) {
    RunConfig c;
    require_known_keys(j, "<root>",
                       {"schema_version", "data", "core", "toolkit", "model_pool", "memory",
                        "workflow", "reward", "adapter", "run"});

    if (j.contains("data")) {
        const auto& d = j.at("data");
        require_known_keys(d, "data",
                           {"csv", "snapshot", "target", "exogenous", "frequency"});
        c.csv_path = get_or<std::string>(d, "csv", "");
        c.snapshot_path = get_or<std::string>(d, "snapshot", "");
        c.target = get_or<std::string>(d, "target", "");
        c.exogenous = get_or<std::vector<std::string>>(d, "exogenous", {});
        c.frequency = get_or<std::string>(d, "frequency", c.frequency);
    }

    if (j.contains("core")) {
        const auto& s = j.at("core");
        require_known_keys(s, "core",
                           {"L", "H", "stride", "train_fraction", "validation_fraction",
                            "test_fraction"});
        c.L = get_or<std::size_t>(s, "L", c.L);
        c.H = get_or<std::size_t>(s, "H", c.H);
        c.stride = get_or<std::size_t>(s, "stride", c.stride);
        c.split.train_fraction = get_or<double>(s, "train_fraction", c.split.train_fraction);
        c.split.validation_fraction =
            get_or<double>(s, "validation_fraction", c.split.validation_fraction);
        c.split.test_fraction = get_or<double>(s, "test_fraction", c.split.test_fraction);
        c.split.stride = c.stride;
    }

    if (j.contains("toolkit")) {
        const auto& t = j.at("toolkit");
        require_known_keys(t, "toolkit",
                           {"kappa", "dropout_threshold", "changepoint_sensitivity",
                            "osc_threshold", "flat_threshold", "max_lag", "p_max"});
        c.toolkit_params.kappa = get_or<double>(t, "kappa", c.toolkit_params.kappa);
        c.toolkit_params.dropout_threshold =
            get_or<double>(t, "dropout_threshold", c.toolkit_params.dropout_threshold);
        c.toolkit_params.changepoint_sensitivity = get_or<double>(
            t, "changepoint_sensitivity", c.toolkit_params.changepoint_sensitivity);
        c.toolkit_params.osc_threshold =
            get_or<double>(t, "osc_threshold", c.toolkit_params.osc_threshold);
        c.toolkit_params.flat_threshold =
            get_or<double>(t, "flat_threshold", c.toolkit_params.flat_threshold);
        c.toolkit_params.max_lag = get_or<std::size_t>(t, "max_lag", c.toolkit_params.max_lag);
        c.toolkit_params.p_max = get_or<std::size_t>(t, "p_max", c.toolkit_params.p_max);
    }

    if (j.contains("model_pool")) {
        const auto& p = j.at("model_pool");
        require_known_keys(p, "model_pool",
                           {"models", "k_clusters", "seasonal_period", "moving_average_q",
                            "es_alpha", "ar_order", "plugins"});
        c.pool_models = get_or<std::vector<std::string>>(p, "models", c.pool_models);
        c.k_clusters = get_or<std::size_t>(p, "k_clusters", c.k_clusters);
        c.pool_params.seasonal_period =
            get_or<std::size_t>(p, "seasonal_period", c.pool_params.seasonal_period);
        c.pool_params.moving_average_q =
            get_or<std::size_t>(p, "moving_average_q", c.pool_params.moving_average_q);
        c.pool_params.es_alpha = get_or<double>(p, "es_alpha", c.pool_params.es_alpha);
        c.pool_params.ar_order = get_or<std::size_t>(p, "ar_order", c.pool_params.ar_order);
        if (p.contains("plugins")) {
            for (const auto& jp : p.at("plugins")) {
                require_known_keys(jp, "model_pool.plugins[]", {"id", "command"});
                c.plugins.push_back(
                    PluginSpec{jp.at("id").get<std::string>(), jp.at("command").get<std::string>()});
            }
        }
    }

    if (j.contains("memory")) {
        const auto& m = j.at("memory");
        require_known_keys(m, "memory",
                           {"eta", "K", "update_policy", "eta_merge", "K_explore", "seed"});
        c.eta = get_or<double>(m, "eta", c.eta);
        c.K = get_or<std::size_t>(m, "K", c.K);
        if (m.contains("update_policy"))
            c.update_policy =
                memory::update_policy_from_string(m.at("update_policy").get<std::string>());
        c.eta_merge = get_or<double>(m, "eta_merge", c.eta_merge);
        c.K_explore = get_or<std::size_t>(m, "K_explore", c.K_explore);
        c.seed = get_or<std::uint64_t>(m, "seed", c.seed);
    }

    if (j.contains("workflow")) {
        const auto& w = j.at("workflow");
        require_known_keys(w, "workflow", {"C_max", "mode", "arch", "beta_trend"});
        c.C_max = get_or<std::size_t>(w, "C_max", c.C_max);
        if (w.contains("mode")) c.mode = toolkit::mode_from_string(w.at("mode").get<std::string>());
        if (w.contains("arch"))
            c.arch = workflow::arch_from_string(w.at("arch").get<std::string>());
        c.beta_trend = get_or<double>(w, "beta_trend", c.beta_trend);
    }

    if (j.contains("reward")) {
        const auto& r = j.at("reward");
        require_known_keys(r, "reward",
                           {"P_violation", "alpha", "gamma", "lambda", "nu", "delta", "exp_rate",
                            "variant", "group_size"});
        c.reward_config.P_violation =
            get_or<double>(r, "P_violation", c.reward_config.P_violation);
        c.reward_config.alpha = get_or<double>(r, "alpha", c.reward_config.alpha);
        c.reward_config.gamma = get_or<double>(r, "gamma", c.reward_config.gamma);
        c.reward_config.lambda = get_or<double>(r, "lambda", c.reward_config.lambda);
        c.reward_config.nu = get_or<double>(r, "nu", c.reward_config.nu);
        c.reward_config.delta = get_or<double>(r, "delta", c.reward_config.delta);
        c.reward_config.exp_rate = get_or<double>(r, "exp_rate", c.reward_config.exp_rate);
        if (r.contains("variant"))
            c.reward_config.variant =
                reward::variant_from_string(r.at("variant").get<std::string>());
        c.reward_config.group_size =
            get_or<std::size_t>(r, "group_size", c.reward_config.group_size);
    }

    if (j.contains("adapter")) {
        const auto& a = j.at("adapter");
        require_known_keys(a, "adapter",
                           {"kind", "endpoint", "planner_model", "forecaster_model",
                            "reflector_model", "temperature", "max_tokens", "retry_budget",
                            "api_key_env", "planner_system", "forecaster_system",
                            "reflector_system"});
        c.adapter_kind = get_or<std::string>(a, "kind", c.adapter_kind);
        c.remote.endpoint = get_or<std::string>(a, "endpoint", "");
        c.remote.planner_model = get_or<std::string>(a, "planner_model", "");
        c.remote.forecaster_model = get_or<std::string>(a, "forecaster_model", "");
        c.remote.reflector_model = get_or<std::string>(a, "reflector_model", "");
        c.remote.temperature = get_or<double>(a, "temperature", c.remote.temperature);
        c.remote.max_tokens = get_or<int>(a, "max_tokens", c.remote.max_tokens);
        c.remote.retry_budget = get_or<int>(a, "retry_budget", c.remote.retry_budget);
        c.remote.api_key_env = get_or<std::string>(a, "api_key_env", c.remote.api_key_env);
        c.remote.planner_system = get_or<std::string>(a, "planner_system", "");
        c.remote.forecaster_system = get_or<std::string>(a, "forecaster_system", "");
        c.remote.reflector_system = get_or<std::string>(a, "reflector_system", "");
    }

    if (j.contains("run")) {
        const auto& r = j.at("run");
        require_known_keys(r, "run", {"workers", "output_dir", "debug_transcripts"});
        c.workers = get_or<int>(r, "workers", c.workers);
        c.output_dir = get_or<std::string>(r, "output_dir", c.output_dir);
        c.debug_transcripts = get_or<bool>(r, "debug_transcripts", c.debug_transcripts);
    }

    if (c.adapter_kind != "mock" && c.adapter_kind != "remote")
        throw ConfigError("adapter.kind must be 'mock' or 'remote'");
    c.split.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    ojson j;
    try {
        j = ojson::parse(read_text_file(path));
    } catch (const ojson::parse_error& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return from_json(j);
}

ojson RunConfig::to_json() const {
    ojson j;
    j["schema_version"] = 1;
    j["data"] = {{"csv", csv_path},
                 {"snapshot", snapshot_path},
                 {"target", target},
                 {"exogenous", exogenous},
                 {"frequency", frequency}};
    j["core"] = {{"L", L},
                 {"H", H},
                 {"stride", stride},
                 {"train_fraction", split.train_fraction},
                 {"validation_fraction", split.validation_fraction},
                 {"test_fraction", split.test_fraction}};
    j["toolkit"] = {{"kappa", toolkit_params.kappa},
                    {"dropout_threshold", toolkit_params.dropout_threshold},
                    {"changepoint_sensitivity", toolkit_params.changepoint_sensitivity},
                    {"osc_threshold", toolkit_params.osc_threshold},
                    {"flat_threshold", toolkit_params.flat_threshold},
                    {"max_lag", toolkit_params.max_lag},
                    {"p_max", toolkit_params.p_max}};
    ojson plugin_list = ojson::array();
    for (const auto& p : plugins) plugin_list.push_back({{"id", p.id}, {"command", p.command}});
    j["model_pool"] = {{"models", pool_models},
                       {"k_clusters", k_clusters},
                       {"seasonal_period", pool_params.seasonal_period},
                       {"moving_average_q", pool_params.moving_average_q},
                       {"es_alpha", pool_params.es_alpha},
                       {"ar_order", pool_params.ar_order},
                       {"plugins", plugin_list}};
    j["memory"] = {{"eta", eta},
                   {"K", K},
                   {"update_policy", memory::to_string(update_policy)},
                   {"eta_merge", eta_merge},
                   {"K_explore", K_explore},
                   {"seed", seed}};
    j["workflow"] = {{"C_max", C_max},
                     {"mode", toolkit::to_string(mode)},
                     {"arch", workflow::to_string(arch)},
                     {"beta_trend", beta_trend}};
    j["reward"] = reward_config.to_json();
    j["adapter"] = {{"kind", adapter_kind},
                    {"endpoint", remote.endpoint},
                    {"planner_model", remote.planner_model},
                    {"forecaster_model", remote.forecaster_model},
                    {"reflector_model", remote.reflector_model},
                    {"temperature", remote.temperature},
                    {"max_tokens", remote.max_tokens},
                    {"retry_budget", remote.retry_budget},
                    {"api_key_env", remote.api_key_env},
                    {"planner_system", remote.planner_system},
                    {"forecaster_system", remote.forecaster_system},
                    {"reflector_system", remote.reflector_system}};
    j["run"] = {{"workers", workers},
                {"output_dir", output_dir},
                {"debug_transcripts", debug_transcripts}};
    return j;
}

void RunConfig::save(const std::string& path) const { write_text_file(path, to_json().dump(2) + "\n"); }

workflow::WorkflowConfig RunConfig::workflow_config() const {
    workflow::WorkflowConfig w;
    w.C_max = C_max;
    w.mode = mode;
    w.arch = arch;
    w.beta_trend = beta_trend;
    w.toolkit = toolkit_params;
    w.memory_K = K;
    w.memory_eta = eta;
    w.debug_transcripts = debug_transcripts;
    return w;
}

pool::ModelPool RunConfig::build_pool() const {
    pool::ModelPool p = pool::make_pool(pool_models, pool_params);
    for (const auto& plugin : plugins) p.push_back(pool::make_plugin_model(plugin.id, plugin.command));
    return p;
}

std::unique_ptr<workflow::PolicyAdapter> RunConfig::build_adapter() const {
    if (adapter_kind == "mock") return std::make_unique<adapters::MockPolicyAdapter>();
    return std::make_unique<adapters::RemotePolicyAdapter>(remote);
}

std::string RunConfig::library_path() const { return output_dir + "/library.bin"; }
std::string RunConfig::memory_path() const { return output_dir + "/memory.jsonl"; }
std::string RunConfig::memory_manifest_path() const { return output_dir + "/memory_manifest.json"; }

}  // namespace castflow::cli
