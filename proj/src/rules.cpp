#include "agentgov/rules.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

constexpr std::string_view kRegistryPrefix = "registry:";

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_membership(CompareOp op) { return op == CompareOp::In || op == CompareOp::NotIn; }

bool scalar_equal(const Scalar& a, const Scalar& b) { return a.index() == b.index() && a == b; }

bool contains(const std::vector<Scalar>& list, const Scalar& v) {
  return std::any_of(list.begin(), list.end(), [&](const Scalar& x) { return scalar_equal(x, v); });
}

bool ordered_compare(CompareOp op, const Scalar& lhs, const Scalar& rhs, std::string_view key) {
  if (lhs.index() != rhs.index() || kind_of(lhs) == ScalarKind::Boolean) {
    throw GovernanceError(ErrorCode::TypeMismatch,
                          "ordered comparison on '" + std::string(key) + "' between " +
                              std::string(to_string(kind_of(lhs))) + " and " + std::string(to_string(kind_of(rhs))),
                          std::string(key));
  }
  const auto cmp = [&](const auto& a, const auto& b) {
    switch (op) {
      case CompareOp::Gt: return a > b;
      case CompareOp::Gte: return a >= b;
      case CompareOp::Lt: return a < b;
      case CompareOp::Lte: return a <= b;
      default: return false;
    }
  };
  if (kind_of(lhs) == ScalarKind::Number) return cmp(std::get<double>(lhs), std::get<double>(rhs));
  return cmp(std::get<std::string>(lhs), std::get<std::string>(rhs));
}

const json& require(const json& j, const char* field, const std::string& where) {
  const auto it = j.find(field);
  if (it == j.end()) throw GovernanceError(ErrorCode::ParseError, where + ": missing field '" + field + "'");
  return *it;
}

std::string string_field(const json& j, const char* field, const std::string& where, bool required = true) {
  const auto it = j.find(field);
  if (it == j.end() || it->is_null()) {
    if (required) throw GovernanceError(ErrorCode::ParseError, where + ": missing field '" + field + "'");
    return {};
  }
  if (!it->is_string()) throw GovernanceError(ErrorCode::ParseError, where + ": '" + field + "' must be a string");
  return it->get<std::string>();
}

std::set<std::string> string_set(const json& j, const char* field, const std::string& where) {
  const auto it = j.find(field);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_array()) throw GovernanceError(ErrorCode::ParseError, where + ": '" + field + "' must be an array");
  std::set<std::string> out;
  for (const auto& item : *it) {
    if (!item.is_string()) throw GovernanceError(ErrorCode::ParseError, where + ": '" + field + "' entries must be strings");
    out.insert(item.get<std::string>());
  }
  return out;
}

Comparison comparison_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw GovernanceError(ErrorCode::ParseError, where + ": comparison must be an object");
  Comparison cmp;
  cmp.key = string_field(j, "key", where);
  const auto op_text = string_field(j, "op", where);
  const auto op = parse_compare_op(op_text);
  if (!op) throw GovernanceError(ErrorCode::ParseError, where + ": unknown operator '" + op_text + "'");
  cmp.op = *op;
  const json& value = require(j, "value", where);
  if (value.is_array()) {
    std::vector<Scalar> list;
    for (const auto& v : value) list.push_back(scalar_from_json(v));
    cmp.value = std::move(list);
  } else if (value.is_string() && is_membership(cmp.op) && value.get<std::string>().starts_with(kRegistryPrefix)) {
    cmp.value = RegistryRef{value.get<std::string>().substr(kRegistryPrefix.size())};
  } else {
    cmp.value = scalar_from_json(value);
  }
  return cmp;
}

std::vector<Comparison> comparisons_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw GovernanceError(ErrorCode::ParseError, where + ": expected an array of comparisons");
  std::vector<Comparison> out;
  for (const auto& item : j) out.push_back(comparison_from_json(item, where));
  return out;
}

json operand_to_json(const Operand& value) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Scalar>) {
          return to_json(v);
        } else if constexpr (std::is_same_v<T, RegistryRef>) {
          return std::string(kRegistryPrefix) + v.name;
        } else {
          json arr = json::array();
          for (const auto& s : v) arr.push_back(to_json(s));
          return arr;
        }
      },
      value);
}

// Do two action-class patterns govern at least one common action?
bool patterns_overlap(const std::string& a, const std::string& b) {
  const bool a_prefix = a.ends_with(".*");
  const bool b_prefix = b.ends_with(".*");
  const std::string a_stem = a_prefix ? a.substr(0, a.size() - 1) : a;  // keeps trailing '.'
  const std::string b_stem = b_prefix ? b.substr(0, b.size() - 1) : b;
  if (!a_prefix && !b_prefix) return a == b;
  if (a_prefix && !b_prefix) return b.starts_with(a_stem);
  if (!a_prefix && b_prefix) return a.starts_with(b_stem);
  return a_stem.starts_with(b_stem) || b_stem.starts_with(a_stem);
}

std::set<std::string> shared_classes(const std::set<std::string>& a, const std::set<std::string>& b, bool& overlap) {
  overlap = false;
  if (a.empty() || b.empty()) {
    overlap = true;
    return a.empty() ? b : a;
  }
  std::set<std::string> shared;
  for (const auto& pa : a) {
    for (const auto& pb : b) {
      if (!patterns_overlap(pa, pb)) continue;
      overlap = true;
      // Keep the narrower of the two patterns.
      const bool pa_prefix = pa.ends_with(".*");
      const bool pb_prefix = pb.ends_with(".*");
      if (pa_prefix == pb_prefix) shared.insert(pa.size() >= pb.size() ? pa : pb);
      else shared.insert(pa_prefix ? pb : pa);
    }
  }
  return shared;
}

bool contradictory(Modality a, Modality b) {
  const auto pair = [&](Modality x, Modality y) { return (a == x && b == y) || (a == y && b == x); };
  return pair(Modality::Allow, Modality::Forbid) || pair(Modality::Allow, Modality::RequireApproval);
}

int restrictiveness(Modality m) {
  switch (m) {
    case Modality::Forbid: return 3;
    case Modality::RequireApproval: return 2;
    case Modality::ReadOnly: return 1;
    case Modality::Allow: return 0;
  }
  return 0;
}

}  // namespace

// ── Enumerations ─────────────────────────────────────────────────────────────

std::string_view to_string(GovernanceLayer layer) noexcept {
  switch (layer) {
    case GovernanceLayer::Global: return "GLOBAL";
    case GovernanceLayer::Workflow: return "WORKFLOW";
    case GovernanceLayer::Agent: return "AGENT";
    case GovernanceLayer::Situational: return "SITUATIONAL";
  }
  return "UNKNOWN";
}

std::optional<GovernanceLayer> parse_layer(std::string_view text) noexcept {
  for (const auto layer : kAllLayers) {
    if (to_string(layer) == text) return layer;
  }
  return std::nullopt;
}

std::string_view to_string(CompareOp op) noexcept {
  switch (op) {
    case CompareOp::Eq: return "EQ";
    case CompareOp::Ne: return "NE";
    case CompareOp::Gt: return "GT";
    case CompareOp::Gte: return "GTE";
    case CompareOp::Lt: return "LT";
    case CompareOp::Lte: return "LTE";
    case CompareOp::In: return "IN";
    case CompareOp::NotIn: return "NOT_IN";
  }
  return "UNKNOWN";
}

std::optional<CompareOp> parse_compare_op(std::string_view text) noexcept {
  for (const auto op : {CompareOp::Eq, CompareOp::Ne, CompareOp::Gt, CompareOp::Gte, CompareOp::Lt, CompareOp::Lte,
                        CompareOp::In, CompareOp::NotIn}) {
    if (to_string(op) == text) return op;
  }
  return std::nullopt;
}

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::Forbid: return "FORBID";
    case Modality::RequireApproval: return "REQUIRE_APPROVAL";
    case Modality::ReadOnly: return "READ_ONLY";
    case Modality::Allow: return "ALLOW";
  }
  return "UNKNOWN";
}

std::optional<Modality> parse_modality(std::string_view text) noexcept {
  for (const auto m : {Modality::Forbid, Modality::RequireApproval, Modality::ReadOnly, Modality::Allow}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

std::string_view to_string(ViolationCode code) noexcept {
  switch (code) {
    case ViolationCode::DuplicateId: return "DUPLICATE_ID";
    case ViolationCode::EmptyId: return "EMPTY_ID";
    case ViolationCode::EmptyText: return "EMPTY_TEXT";
    case ViolationCode::MissingPredicate: return "MISSING_PREDICATE";
    case ViolationCode::UnexpectedPredicate: return "UNEXPECTED_PREDICATE";
    case ViolationCode::EmptyPredicate: return "EMPTY_PREDICATE";
    case ViolationCode::ScopedGlobalRule: return "SCOPED_GLOBAL_RULE";
    case ViolationCode::EmptyWorkflowScope: return "EMPTY_WORKFLOW_SCOPE";
    case ViolationCode::EmptyAgentScope: return "EMPTY_AGENT_SCOPE";
    case ViolationCode::InvalidOperand: return "INVALID_OPERAND";
    case ViolationCode::InvalidVersion: return "INVALID_VERSION";
  }
  return "UNKNOWN";
}

std::string_view to_string(LintCode code) noexcept {
  switch (code) {
    case LintCode::MissingRationale: return "MISSING_RATIONALE";
    case LintCode::NegativeOnlyFraming: return "NEGATIVE_ONLY_FRAMING";
    case LintCode::OverbroadScope: return "OVERBROAD_SCOPE";
  }
  return "UNKNOWN";
}

// ── Scope ────────────────────────────────────────────────────────────────────

bool Scope::matches(std::string_view agent_id, std::string_view workflow_id) const {
  const auto in = [](const std::set<std::string>& set, std::string_view v) {
    return set.empty() || set.contains(std::string(v));
  };
  return in(workflow_ids, workflow_id) && in(agent_ids, agent_id);
}

bool Scope::overlaps(const Scope& other) const {
  const auto intersects = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() || b.empty()) return true;
    return std::any_of(a.begin(), a.end(), [&](const std::string& x) { return b.contains(x); });
  };
  return intersects(workflow_ids, other.workflow_ids) && intersects(agent_ids, other.agent_ids);
}

const Rule* RuleSetDocument::find(std::string_view id) const {
  const auto it = std::find_if(rules.begin(), rules.end(), [&](const Rule& r) { return r.id == id; });
  return it == rules.end() ? nullptr : &*it;
}

// ── Evaluation ───────────────────────────────────────────────────────────────

bool evaluate_comparison(const Comparison& cmp, const ValueSource& source) {
  const Scalar* actual = source.value ? source.value(cmp.key) : nullptr;
  if (actual == nullptr) return false;

  if (is_membership(cmp.op)) {
    bool member = false;
    if (const auto* list = std::get_if<std::vector<Scalar>>(&cmp.value)) {
      member = contains(*list, *actual);
    } else if (const auto* ref = std::get_if<RegistryRef>(&cmp.value)) {
      const auto* registry = source.registry ? source.registry(ref->name) : nullptr;
      const auto* str = std::get_if<std::string>(actual);
      member = registry != nullptr && str != nullptr && registry->contains(*str);
    } else {
      member = scalar_equal(std::get<Scalar>(cmp.value), *actual);
    }
    return cmp.op == CompareOp::In ? member : !member;
  }

  const auto* expected = std::get_if<Scalar>(&cmp.value);
  if (expected == nullptr) {
    throw GovernanceError(ErrorCode::TypeMismatch,
                          "operator " + std::string(to_string(cmp.op)) + " on '" + cmp.key + "' needs a scalar operand",
                          cmp.key);
  }
  switch (cmp.op) {
    case CompareOp::Eq: return scalar_equal(*actual, *expected);
    case CompareOp::Ne: return !scalar_equal(*actual, *expected);
    default: return ordered_compare(cmp.op, *actual, *expected, cmp.key);
  }
}

bool evaluate_all(std::span<const Comparison> conjuncts, const ValueSource& source) {
  // Every conjunct is evaluated so type errors surface even after a false.
  bool result = true;
  for (const auto& c : conjuncts) result = evaluate_comparison(c, source) && result;
  return result;
}

bool evaluate_predicate(const ActivationPredicate& predicate, const RuntimeContext& ctx) {
  const ValueSource source{[&](std::string_view k) { return ctx.signal(k); },
                           [&](std::string_view n) { return ctx.registry(n); }};
  return evaluate_all(predicate.conjuncts, source);
}

// ── Serialization ────────────────────────────────────────────────────────────

json to_json(const Comparison& c) {
  return {{"key", c.key}, {"op", to_string(c.op)}, {"value", operand_to_json(c.value)}};
}

json to_json(const Rule& rule) {
  json out = {{"id", rule.id},
              {"layer", to_string(rule.layer)},
              {"scope", {{"workflow_ids", rule.scope.workflow_ids}, {"agent_ids", rule.scope.agent_ids}}},
              {"text", rule.text},
              {"rationale", rule.rationale},
              {"enabled", rule.enabled}};
  if (rule.constraint) {
    json cond = json::array();
    for (const auto& c : rule.constraint->condition) cond.push_back(to_json(c));
    out["constraint"] = {{"action_classes", rule.constraint->action_classes},
                         {"modality", to_string(rule.constraint->modality)},
                         {"condition", cond}};
  }
  if (rule.predicate) {
    json conj = json::array();
    for (const auto& c : rule.predicate->conjuncts) conj.push_back(to_json(c));
    out["predicate"] = {{"conjuncts", conj}};
  }
  return out;
}

json to_json(const RuleSetDocument& doc) {
  json rules = json::array();
  for (const auto& r : doc.rules) rules.push_back(to_json(r));
  return {{"version", doc.version},
          {"metadata", {{"author", doc.metadata.author}, {"timestamp", doc.metadata.timestamp}}},
          {"rules", rules}};
}

Rule rule_from_json(const json& j) {
  if (!j.is_object()) throw GovernanceError(ErrorCode::ParseError, "rule entries must be objects");
  Rule rule;
  rule.id = string_field(j, "id", "rule");
  const std::string where = "rule " + rule.id;
  const auto layer_text = string_field(j, "layer", where);
  const auto layer = parse_layer(layer_text);
  if (!layer) throw GovernanceError(ErrorCode::ParseError, where + ": unknown layer '" + layer_text + "'", rule.id);
  rule.layer = *layer;
  if (const auto it = j.find("scope"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw GovernanceError(ErrorCode::ParseError, where + ": 'scope' must be an object", rule.id);
    rule.scope.workflow_ids = string_set(*it, "workflow_ids", where);
    rule.scope.agent_ids = string_set(*it, "agent_ids", where);
  }
  rule.text = string_field(j, "text", where);
  rule.rationale = string_field(j, "rationale", where, false);
  if (const auto it = j.find("enabled"); it != j.end()) {
    if (!it->is_boolean()) throw GovernanceError(ErrorCode::ParseError, where + ": 'enabled' must be boolean", rule.id);
    rule.enabled = it->get<bool>();
  }
  if (const auto it = j.find("constraint"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw GovernanceError(ErrorCode::ParseError, where + ": 'constraint' must be an object", rule.id);
    MachineConstraint mc;
    mc.action_classes = string_set(*it, "action_classes", where);
    const auto modality_text = string_field(*it, "modality", where);
    const auto modality = parse_modality(modality_text);
    if (!modality) {
      throw GovernanceError(ErrorCode::ParseError, where + ": unknown modality '" + modality_text + "'", rule.id);
    }
    mc.modality = *modality;
    if (const auto c = it->find("condition"); c != it->end() && !c->is_null()) {
      mc.condition = comparisons_from_json(*c, where);
    }
    rule.constraint = std::move(mc);
  }
  if (const auto it = j.find("predicate"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw GovernanceError(ErrorCode::ParseError, where + ": 'predicate' must be an object", rule.id);
    rule.predicate = ActivationPredicate{comparisons_from_json(require(*it, "conjuncts", where), where)};
  }
  return rule;
}

RuleSetDocument ruleset_from_json(const json& j) {
  if (!j.is_object()) throw GovernanceError(ErrorCode::ParseError, "rule-set document must be an object");
  RuleSetDocument doc;
  const json& version = require(j, "version", "rule-set");
  if (!version.is_number_integer()) throw GovernanceError(ErrorCode::ParseError, "'version' must be an integer");
  doc.version = version.get<std::int64_t>();
  if (const auto it = j.find("metadata"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw GovernanceError(ErrorCode::ParseError, "'metadata' must be an object");
    doc.metadata.author = string_field(*it, "author", "metadata", false);
    doc.metadata.timestamp = string_field(*it, "timestamp", "metadata", false);
  }
  const json& rules = require(j, "rules", "rule-set");
  if (!rules.is_array()) throw GovernanceError(ErrorCode::ParseError, "'rules' must be an array");
  for (const auto& r : rules) doc.rules.push_back(rule_from_json(r));
  return doc;
}

RuleSetDocument load_ruleset(std::string_view source) {
  json j;
  try {
    j = json::parse(source);
  } catch (const json::exception& e) {
    throw GovernanceError(ErrorCode::ParseError, e.what());
  }
  auto doc = ruleset_from_json(j);
  const auto violations = validate_ruleset(doc);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw GovernanceError(ErrorCode::SchemaError,
                          "rule '" + v.rule_id + "': " + std::string(to_string(v.code)) + " (" + v.message + ")",
                          v.rule_id);
  }
  return doc;
}

RuleSetDocument load_ruleset_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GovernanceError(ErrorCode::ParseError, "cannot open rule-set file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_ruleset(buf.str());
}

// ── Validation ───────────────────────────────────────────────────────────────

std::vector<Violation> validate_ruleset(const RuleSetDocument& doc) {
  std::vector<Violation> out;
  if (doc.version < 1) out.push_back({ViolationCode::InvalidVersion, "", "version must be >= 1"});

  std::map<std::string, int> seen;
  for (const auto& r : doc.rules) {
    if (r.id.empty()) {
      out.push_back({ViolationCode::EmptyId, r.id, "rule id must be non-empty"});
    } else if (++seen[r.id] == 2) {
      out.push_back({ViolationCode::DuplicateId, r.id, "rule id appears more than once"});
    }
    if (r.text.empty()) out.push_back({ViolationCode::EmptyText, r.id, "rule text must be non-empty"});

    const bool situational = r.layer == GovernanceLayer::Situational;
    if (situational && !r.predicate) {
      out.push_back({ViolationCode::MissingPredicate, r.id, "situational rules need an activation predicate"});
    }
    if (!situational && r.predicate) {
      out.push_back({ViolationCode::UnexpectedPredicate, r.id, "only situational rules carry activation predicates"});
    }
    if (r.predicate && r.predicate->conjuncts.empty()) {
      out.push_back({ViolationCode::EmptyPredicate, r.id, "activation predicate needs at least one conjunct"});
    }

    switch (r.layer) {
      case GovernanceLayer::Global:
        if (!r.scope.workflow_ids.empty() || !r.scope.agent_ids.empty()) {
          out.push_back({ViolationCode::ScopedGlobalRule, r.id, "global rules apply to every agent and workflow"});
        }
        break;
      case GovernanceLayer::Workflow:
        if (r.scope.workflow_ids.empty()) {
          out.push_back({ViolationCode::EmptyWorkflowScope, r.id, "workflow rules must name workflows"});
        }
        break;
      case GovernanceLayer::Agent:
        if (r.scope.agent_ids.empty()) {
          out.push_back({ViolationCode::EmptyAgentScope, r.id, "agent rules must name agents"});
        }
        break;
      case GovernanceLayer::Situational:
        break;
    }

    const auto check_operands = [&](const std::vector<Comparison>& comparisons) {
      for (const auto& c : comparisons) {
        const bool scalar = std::holds_alternative<Scalar>(c.value);
        const bool ok = is_membership(c.op) ? true : scalar;
        if (!ok || c.key.empty()) {
          out.push_back({ViolationCode::InvalidOperand, r.id,
                         "comparison on '" + c.key + "' with " + std::string(to_string(c.op)) + " has invalid operand"});
        }
      }
    };
    if (r.predicate) check_operands(r.predicate->conjuncts);
    if (r.constraint) check_operands(r.constraint->condition);
  }
  return out;
}

// ── Lint ─────────────────────────────────────────────────────────────────────

LintConfig LintConfig::defaults() {
  return {{"do not", "don't", "never", "must not", "may not", "shall not", "cannot", "can't", "prohibited",
           "forbidden", "not allowed", "not permitted"},
          {"instead", "unless", "except", "rather than", "only", " but ", "should", "restricted to", "in place of",
           "prefer", "use "}};
}

LintConfig LintConfig::from_json(const json& j) {
  LintConfig config = defaults();
  if (!j.is_object()) throw GovernanceError(ErrorCode::ParseError, "lint config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "prohibition_phrases" && key != "alternative_phrases") {
      throw GovernanceError(ErrorCode::ParseError, "unknown lint config key '" + key + "'");
    }
    if (!value.is_array()) throw GovernanceError(ErrorCode::ParseError, "'" + key + "' must be an array of strings");
    std::vector<std::string> phrases;
    for (const auto& p : value) {
      if (!p.is_string()) throw GovernanceError(ErrorCode::ParseError, "'" + key + "' must be an array of strings");
      phrases.push_back(lower(p.get<std::string>()));
    }
    (key == "prohibition_phrases" ? config.prohibition_phrases : config.alternative_phrases) = std::move(phrases);
  }
  return config;
}

json to_json(const LintConfig& config) {
  return {{"prohibition_phrases", config.prohibition_phrases}, {"alternative_phrases", config.alternative_phrases}};
}

std::vector<LintWarning> lint_rule(const Rule& rule, const LintConfig& config) {
  std::vector<LintWarning> out;
  const bool no_rationale = std::all_of(rule.rationale.begin(), rule.rationale.end(),
                                        [](unsigned char c) { return std::isspace(c); });
  if (no_rationale) {
    out.push_back({LintCode::MissingRationale, rule.id, "rule states a constraint without explaining why"});
  }

  const std::string text = " " + lower(rule.text) + " ";
  const auto mentions = [&](const std::vector<std::string>& phrases) {
    return std::any_of(phrases.begin(), phrases.end(),
                       [&](const std::string& p) { return !p.empty() && text.find(p) != std::string::npos; });
  };
  if (no_rationale && mentions(config.prohibition_phrases) && !mentions(config.alternative_phrases)) {
    out.push_back({LintCode::NegativeOnlyFraming, rule.id, "prohibition with no compliant alternative stated"});
  }

  if (rule.layer == GovernanceLayer::Global && rule.constraint && rule.constraint->action_classes.empty() &&
      rule.constraint->modality != Modality::RequireApproval) {
    out.push_back({LintCode::OverbroadScope, rule.id,
                   "global " + std::string(to_string(rule.constraint->modality)) + " constraint governs every action"});
  }
  return out;
}

std::vector<LintWarning> lint_ruleset(const RuleSetDocument& doc, const LintConfig& config) {
  std::vector<LintWarning> out;
  for (const auto& r : doc.rules) {
    auto w = lint_rule(r, config);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

// ── Conflicts ────────────────────────────────────────────────────────────────

bool action_class_matches(const std::set<std::string>& patterns, std::string_view action_class) {
  if (patterns.empty()) return true;
  const std::string action(action_class);
  return std::any_of(patterns.begin(), patterns.end(), [&](const std::string& p) { return patterns_overlap(p, action); });
}

std::vector<ConflictReport> detect_conflicts(const RuleSetDocument& doc) {
  std::vector<const Rule*> constrained;
  for (const auto& r : doc.rules) {
    if (r.constraint) constrained.push_back(&r);
  }
  std::vector<ConflictReport> out;
  for (std::size_t i = 0; i < constrained.size(); ++i) {
    for (std::size_t j = i + 1; j < constrained.size(); ++j) {
      const Rule* a = constrained[i];
      const Rule* b = constrained[j];
      if (!contradictory(a->constraint->modality, b->constraint->modality)) continue;
      if (!a->scope.overlaps(b->scope)) continue;
      bool overlap = false;
      auto shared = shared_classes(a->constraint->action_classes, b->constraint->action_classes, overlap);
      if (!overlap) continue;

      const auto precedence = [](const Rule* r) {
        return std::make_tuple(rank(r->layer), -restrictiveness(r->constraint->modality), r->id);
      };
      const Rule* winner = precedence(a) < precedence(b) ? a : b;
      const Rule* loser = winner == a ? b : a;
      out.push_back({winner->id, loser->id, winner->constraint->modality, loser->constraint->modality,
                     std::move(shared)});
    }
  }
  std::sort(out.begin(), out.end(), [](const ConflictReport& x, const ConflictReport& y) {
    return std::tie(x.winner_id, x.loser_id) < std::tie(y.winner_id, y.loser_id);
  });
  return out;
}

// ── Retrieval ────────────────────────────────────────────────────────────────

std::vector<Rule> applicable_rules(const RuleSetDocument& doc, std::string_view agent_id,
                                   std::string_view workflow_id, const RuntimeContext& ctx) {
  std::vector<Rule> out;
  for (const auto& r : doc.rules) {
    if (!r.enabled || !r.scope.matches(agent_id, workflow_id)) continue;
    if (r.layer == GovernanceLayer::Situational && !(r.predicate && evaluate_predicate(*r.predicate, ctx))) continue;
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const Rule& a, const Rule& b) {
    return std::make_tuple(rank(a.layer), std::cref(a.id)) < std::make_tuple(rank(b.layer), std::cref(b.id));
  });
  return out;
}

json to_json(const Violation& v) {
  return {{"code", to_string(v.code)}, {"rule_id", v.rule_id}, {"message", v.message}};
}

json to_json(const LintWarning& w) {
  return {{"code", to_string(w.code)}, {"rule_id", w.rule_id}, {"message", w.message}};
}

json to_json(const ConflictReport& c) {
  return {{"winner_id", c.winner_id},
          {"loser_id", c.loser_id},
          {"winner_modality", to_string(c.winner_modality)},
          {"loser_modality", to_string(c.loser_modality)},
          {"shared_action_classes", c.shared_action_classes}};
}

}  // namespace agentgov
