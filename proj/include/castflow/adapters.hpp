#pragma once

#include <memory>
#include <string>

#include "castflow/workflow.hpp"

namespace castflow::adapters {

// Deterministic rule-based policy: the planner adopts the top retrieved
// strategy or falls back to the default schedule; the forecaster applies
// evidence-guided corrections on top of the ensemble baseline; the
// reflector checks widened quality bounds and direction consistency.
// Identical inputs always produce identical outputs.
class MockPolicyAdapter final : public workflow::PolicyAdapter {
public:
    std::string planner_id() const override { return "mock-planner"; }
    std::string forecaster_id() const override { return "mock-forecaster"; }
    std::string reflector_id() const override { return "mock-reflector"; }

    memory::ToolSchedule plan(const workflow::PlanRequest& request) override;
    std::string forecast(const workflow::ForecastRequest& request) override;
    workflow::LogicVerdict reflect(const workflow::ReflectRequest& request) override;
};

struct RemoteAdapterConfig {
    std::string endpoint;  // full URL of the chat-completion endpoint
    std::string planner_model;
    std::string forecaster_model;
    std::string reflector_model;
    double temperature = 0.2;
    int max_tokens = 2048;
    int retry_budget = 2;
    std::string api_key_env = "CASTFLOW_API_KEY";
    // Role system prompts are configuration, overridable per experiment.
    std::string planner_system;
    std::string forecaster_system;
    std::string reflector_system;
};

// HTTP transport speaking the de-facto chat-completion wire shape:
// request {model, messages[{role, content}], temperature, max_tokens},
// response {choices[0].message.content}. Transport failures retry up to
// retry_budget times, then surface as WorkflowError("<role>_unavailable").
class RemotePolicyAdapter final : public workflow::PolicyAdapter {
public:
    explicit RemotePolicyAdapter(RemoteAdapterConfig config);

    std::string planner_id() const override { return config_.planner_model; }
    std::string forecaster_id() const override { return config_.forecaster_model; }
    std::string reflector_id() const override { return config_.reflector_model; }

    memory::ToolSchedule plan(const workflow::PlanRequest& request) override;
    std::string forecast(const workflow::ForecastRequest& request) override;
    workflow::LogicVerdict reflect(const workflow::ReflectRequest& request) override;

private:
    std::string chat(const std::string& role_label, const std::string& model,
                     const std::string& system_prompt, const std::string& user_prompt,
                     std::vector<std::string>* transcript_sink);

    RemoteAdapterConfig config_;
};

}  // namespace castflow::adapters
