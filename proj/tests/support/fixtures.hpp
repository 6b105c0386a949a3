#pragma once

#include <memory>
#include <string>

#include "agentgov/deliberator.hpp"
#include "agentgov/engine.hpp"
#include "agentgov/harness.hpp"
#include "agentgov/rules.hpp"
#include "agentgov/service.hpp"

namespace agentgov::testing {

inline std::string source_path(const std::string& relative) { return std::string(AGENTGOV_SOURCE_DIR) + "/" + relative; }

inline RuleSetDocument flowr_rules() { return load_ruleset_file(source_path("rules/flowr.json")); }

inline RuntimeContext flowr_context(bool disruption = false) {
  RuntimeContext ctx;
  ctx.signals["supplier_disruption"] = disruption;
  ctx.registries["verified_suppliers"] = {"SUP-0112", "SUP-0187", "SUP-0203", "SUP-0340", "SUP-0415"};
  ctx.snapshot_id = "ctx-test";
  ctx.version = 1;
  return ctx;
}

inline IntentDescriptor make_intent(std::string id, std::string agent, std::string action, ParameterMap params,
                                    bool irreversible = false) {
  IntentDescriptor i;
  i.intent_id = std::move(id);
  i.agent_id = std::move(agent);
  i.workflow_id = "flowr";
  i.action_class = std::move(action);
  i.description = "test intent " + i.intent_id;
  i.parameters = std::move(params);
  i.irreversible = irreversible;
  return i;
}

inline IntentDescriptor s1_intent() {
  return make_intent("s1", "demand_forecasting", "sales_data.read",
                     {{"store_id", std::string("STORE-014")}, {"period", std::string("2026-08")}});
}

inline IntentDescriptor s2_intent(double amount = 45000) {
  auto i = make_intent("s2", "procurement", "purchase_order.submit",
                       {{"amount_usd", amount}, {"supplier_id", std::string("SUP-0340")}}, true);
  i.description = "Submit a purchase order to SUP-0340";
  return i;
}

inline IntentDescriptor s3_intent(bool with_alternative = true) {
  auto i = make_intent("s3", "supplier_coordination", "supplier.contact",
                       {{"supplier_id", std::string("SUP-9931")}, {"quantity", 1200.0}});
  if (with_alternative) i.alternatives.push_back({{"supplier_id", std::string("SUP-0187")}, {"quantity", 1200.0}});
  return i;
}

inline IntentDescriptor s4_intent() {
  return make_intent("s4", "inventory_replenishment", "supplier.substitute",
                     {{"disrupted_supplier_id", std::string("SUP-0112")}, {"supplier_id", std::string("SUP-0203")}});
}

inline std::vector<std::string> ids(const std::vector<Rule>& rules) {
  std::vector<std::string> out;
  for (const auto& r : rules) out.push_back(r.id);
  return out;
}

/// Service over the shipped Flowr assets with auth tokens ops=op-token,
/// procurement/demand_forecasting/... = <agent>-token.
inline ServiceConfig flowr_service_config() {
  ServiceConfig c;
  c.rules_path = source_path("rules/flowr.json");
  c.context_seed_path = source_path("context/flowr.json");
  c.prompts_dir = source_path("prompts");
  c.operator_tokens = {{"ops", "op-token"}};
  for (const char* agent : {"procurement", "demand_forecasting", "supplier_coordination", "inventory_replenishment"}) {
    c.agent_tokens[agent] = std::string(agent) + "-token";
  }
  return c;
}

}  // namespace agentgov::testing
