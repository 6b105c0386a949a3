#include "agentgov/prompt.hpp"

#include <fstream>
#include <sstream>

#include "agentgov/error.hpp"

namespace agentgov {

namespace {

constexpr std::string_view kDefaultEnforcement =
    R"(GOVERNANCE CHECK - required before any consequential action.
Work through these steps and report the result:
a) Name the concrete action and its parameters.
b) Go through every entry in the GOVERNANCE RULES section below; those are the rules in force for you now.
c) For each rule, decide whether the action satisfies it, breaks it, or needs human sign-off.
d) Settle on exactly one outcome token, PROCEED, SELF-CORRECT or ESCALATE, and return it in the reply format below.

Outcome meanings:
PROCEED: nothing in the rules stands in the way.
SELF-CORRECT: the action as stated breaks a rule but a changed parameter set would not; supply that parameter set.
ESCALATE: a rule demands human sign-off, no compliant variant exists, or you cannot tell.
Sections appear in precedence order with Layer 1 strongest; keep that order when rules disagree.)";

constexpr std::string_view kDefaultReplyFormat =
    R"(Reply with exactly one JSON object of this shape:
{"decision": "PROCEED" | "SELF-CORRECT" | "ESCALATE",
 "rules_consulted": [rule ids that determined the decision; [] if no rule is violated],
 "reasoning": "your permissibility reasoning",
 "proposed_parameters": {revised parameters; required for SELF-CORRECT only},
 "confidence": "UNAMBIGUOUS" | "UNCERTAIN"})";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GovernanceError(ErrorCode::ParseError, "cannot read prompt asset '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::string single_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) out.push_back(c == '\n' || c == '\r' ? ' ' : c);
  return out;
}

std::string fail_subject(std::string_view reply) { return std::string(reply.substr(0, 4096)); }

[[noreturn]] void parse_failure(const std::string& why, std::string_view reply) {
  throw GovernanceError(ErrorCode::ParseFailure, why, fail_subject(reply));
}

}  // namespace

std::string PromptTemplates::version() const {
  return "tmpl-" + sha256_hex(enforcement + '\x1f' + reply_format).substr(0, 12);
}

PromptTemplates PromptTemplates::defaults() {
  return {std::string(kDefaultEnforcement), std::string(kDefaultReplyFormat)};
}

PromptTemplates PromptTemplates::load(const std::string& dir) {
  PromptTemplates t{read_file(dir + "/enforcement.txt"), read_file(dir + "/reply_format.txt")};
  for (const char* token : {"PROCEED", "SELF-CORRECT", "ESCALATE"}) {
    if (t.enforcement.find(token) == std::string::npos) {
      throw GovernanceError(ErrorCode::ParseError, std::string("enforcement template lacks outcome token ") + token);
    }
  }
  return t;
}

std::string render_governance_block(std::string_view agent_id, std::string_view workflow_id,
                                    std::span<const Rule> rules, const RuntimeContext& ctx) {
  std::ostringstream out;
  out << "=== GOVERNANCE RULES ===\n";
  out << "agent_id: " << agent_id << "\n";
  out << "workflow_id: " << workflow_id << "\n";
  out << "context_snapshot: " << (ctx.snapshot_id.empty() ? "-" : ctx.snapshot_id) << "\n";
  for (const auto layer : kAllLayers) {
    out << "\n[Layer " << rank(layer) << ": " << to_string(layer) << "]\n";
    bool any = false;
    for (const auto& r : rules) {
      if (r.layer != layer) continue;
      any = true;
      out << "- [" << r.id << "] " << single_line(r.text) << " (Rationale: "
          << (r.rationale.empty() ? "none stated" : single_line(r.rationale)) << ")\n";
    }
    if (!any) out << "(none)\n";
  }
  out << "=== END GOVERNANCE RULES ===";
  return out.str();
}

GovernancePrompt build_governance_prompt(const PromptTemplates& templates, const IntentDescriptor& intent,
                                         std::span<const Rule> rules, const RuntimeContext& ctx,
                                         const std::vector<std::string>& verified_approvals) {
  GovernancePrompt p;
  p.system_text = templates.enforcement + "\n\n" + templates.reply_format + "\n\n" +
                  render_governance_block(intent.agent_id, intent.workflow_id, rules, ctx);

  json shown = to_json(intent);
  shown.erase("approvals");
  std::ostringstream user;
  user << "Intended action: " << single_line(intent.description) << "\n";
  user << "Action class: " << intent.action_class << "\n";
  user << "Irreversible: " << (intent.irreversible ? "yes" : "no") << "\n";
  user << "Verified human approvals on file for rules: ";
  if (verified_approvals.empty()) user << "none";
  for (std::size_t i = 0; i < verified_approvals.size(); ++i) user << (i ? ", " : "") << verified_approvals[i];
  user << "\n";
  user << "Alternatives offered (in preference order): " << intent.alternatives.size() << "\n";
  user << "Intent:\n" << canonical_dump(shown);
  p.user_text = user.str();
  return p;
}

std::optional<std::pair<std::size_t, std::size_t>> find_balanced_object(std::string_view text, std::size_t from) {
  for (std::size_t start = text.find('{', from); start != std::string_view::npos; start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) return std::make_pair(start, i + 1);
    }
    // Unbalanced from this brace; try the next one.
  }
  return std::nullopt;
}

DeliberationVerdict parse_decision(std::string_view reply) {
  json obj;
  bool found = false;
  for (std::size_t from = 0; !found;) {
    const auto range = find_balanced_object(reply, from);
    if (!range) break;
    const auto candidate = json::parse(reply.substr(range->first, range->second - range->first), nullptr, false);
    if (candidate.is_object() && candidate.contains("decision")) {
      obj = candidate;
      found = true;
    } else {
      from = range->first + 1;
    }
  }
  if (!found) parse_failure("reply contains no structured decision object", reply);

  DeliberationVerdict v;
  const auto& decision = obj["decision"];
  if (!decision.is_string()) parse_failure("'decision' must be a string", reply);
  const auto outcome = parse_outcome(decision.get<std::string>());
  if (!outcome) parse_failure("unknown decision '" + decision.get<std::string>() + "'", reply);
  v.outcome = *outcome;

  const auto rules = obj.find("rules_consulted");
  if (rules == obj.end() || !rules->is_array()) parse_failure("'rules_consulted' must be an array", reply);
  for (const auto& id : *rules) {
    if (!id.is_string()) parse_failure("'rules_consulted' entries must be strings", reply);
    v.rules_cited.push_back(id.get<std::string>());
  }

  const auto reasoning = obj.find("reasoning");
  if (reasoning == obj.end() || !reasoning->is_string() || reasoning->get<std::string>().empty()) {
    parse_failure("'reasoning' must be a non-empty string", reply);
  }
  v.reasoning = reasoning->get<std::string>();

  if (const auto it = obj.find("proposed_parameters"); it != obj.end() && !it->is_null()) {
    try {
      v.proposed_parameters = parameters_from_json(*it);
    } catch (const GovernanceError& e) {
      parse_failure(std::string("'proposed_parameters': ") + e.detail(), reply);
    }
  }
  if (v.outcome == Outcome::SelfCorrect && !v.proposed_parameters) {
    parse_failure("SELF-CORRECT requires 'proposed_parameters'", reply);
  }
  if (v.outcome != Outcome::SelfCorrect) v.proposed_parameters.reset();

  if (const auto it = obj.find("confidence"); it != obj.end() && !it->is_null()) {
    const std::string c = it->is_string() ? it->get<std::string>() : "";
    if (c == "UNCERTAIN" || c == "uncertain") v.confidence = Confidence::Uncertain;
    else if (c == "UNAMBIGUOUS" || c == "unambiguous") v.confidence = Confidence::Unambiguous;
    else parse_failure("unknown confidence '" + c + "'", reply);
  }
  if (v.confidence == Confidence::Uncertain && v.outcome != Outcome::Escalate) {
    parse_failure("an UNCERTAIN verdict must ESCALATE", reply);
  }
  return v;
}

std::string render_reply(const DeliberationVerdict& verdict) {
  json out = {{"decision", verdict.outcome == Outcome::SelfCorrect ? "SELF-CORRECT" : std::string(to_string(verdict.outcome))},
              {"rules_consulted", verdict.rules_cited},
              {"reasoning", verdict.reasoning},
              {"confidence", to_string(verdict.confidence)}};
  if (verdict.proposed_parameters) out["proposed_parameters"] = to_json(*verdict.proposed_parameters);
  return out.dump(2);
}

}  // namespace agentgov
