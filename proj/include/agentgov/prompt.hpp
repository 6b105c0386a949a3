#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agentgov/context.hpp"
#include "agentgov/intent.hpp"
#include "agentgov/rules.hpp"

namespace agentgov {

/// Operator-editable prompt assets. `version()` is derived from their
/// content, so amended wording is distinguishable in every trace.
struct PromptTemplates {
  std::string enforcement;
  std::string reply_format;

  std::string version() const;

  static PromptTemplates defaults();
  /// Reads `<dir>/enforcement.txt` and `<dir>/reply_format.txt`. Throws
  /// PARSE_ERROR when either is missing or the enforcement text lacks one of
  /// the outcome tokens.
  static PromptTemplates load(const std::string& dir);
};

struct GovernancePrompt {
  std::string system_text;
  std::string user_text;
};

/// Rules grouped by layer, all four sections always present.
std::string render_governance_block(std::string_view agent_id, std::string_view workflow_id,
                                    std::span<const Rule> rules, const RuntimeContext& ctx);

/// system = enforcement + reply format + governance block;
/// user = the intent, serialized deterministically. Approval tokens are never
/// rendered: only the ids of rules whose approval `verified_approvals` lists.
GovernancePrompt build_governance_prompt(const PromptTemplates& templates, const IntentDescriptor& intent,
                                         std::span<const Rule> rules, const RuntimeContext& ctx,
                                         const std::vector<std::string>& verified_approvals = {});

/// Extracts the first balanced JSON object in `reply` that carries a
/// "decision" field and decodes it. Throws PARSE_FAILURE (subject = reply).
DeliberationVerdict parse_decision(std::string_view reply);

/// The reply format a model is asked to produce, for `verdict`.
std::string render_reply(const DeliberationVerdict& verdict);

/// Byte range of the first balanced {...} starting at or after `from`,
/// honoring JSON string escapes.
std::optional<std::pair<std::size_t, std::size_t>> find_balanced_object(std::string_view text, std::size_t from = 0);

}  // namespace agentgov
