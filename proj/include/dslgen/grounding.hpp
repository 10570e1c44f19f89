#pragma once

#include <filesystem>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dslgen/catalog.hpp"
#include "dslgen/embedding.hpp"
#include "dslgen/llm_client.hpp"
#include "dslgen/retrieval.hpp"
#include "dslgen/vector_index.hpp"

namespace dslgen {

// Counts prompt tokens. The default estimate is ceil(bytes / 4).
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::size_t count(std::string_view text) const = 0;
};

class CharHeuristicTokenizer : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override { return (text.size() + 3) / 4; }
};

struct GroundingConfig {
  std::size_t n_shots = 5;
  bool use_fd = false;   // definitions of APIs used by the retrieved shots
  bool use_sfd = false;  // definitions retrieved by query similarity
  std::size_t sfd_k = 5;
  std::size_t token_budget = 16000;
  std::string instruction_template = "default-v1";

  // Throws ConfigError when use_sfd is set with sfd_k == 0.
  void validate() const;

  Json to_json() const;
  static GroundingConfig from_json(const Json& j);
};

// Plain-text template with {{name}} placeholders. Lines between
// {{#name}} and {{/name}} are kept only when the placeholder's content is
// non-empty. For metaprompts, everything before the line holding {{query}}
// is the system message and the rest is the user message.
struct PromptTemplate {
  std::string id;
  std::string text;

  std::string content_hash() const;

  // Built-in ids ("default-v1", "nl-description-v1") or a path to a file.
  static PromptTemplate resolve(std::string_view id_or_path);
  static PromptTemplate from_text(std::string id, std::string text);

  // Throws ConfigError unless every name appears as {{name}}.
  void require(std::initializer_list<std::string_view> names) const;

  // Substitutes placeholders and resolves {{#name}} sections.
  std::string render(const std::vector<std::pair<std::string, std::string>>& values) const;
};

struct FdSelection {
  std::vector<const FunctionDefinition*> definitions;  // first-occurrence order
  std::vector<ApiName> missing;                        // not in the catalog
};

// Union of the shots' API names in first-occurrence order, de-duplicated and
// resolved against the catalog.
FdSelection extract_fds_for_shots(std::span<const ExamplePair> shots, const Catalog& catalog);

// Index over rendered definitions, separate from the shot index.
class FdIndex {
 public:
  const std::string& provider_name() const { return provider_name_; }
  std::size_t size() const { return definitions_.size(); }
  const std::vector<const FunctionDefinition*>& definitions() const { return definitions_; }
  const VectorIndex& vectors() const { return vectors_; }

 private:
  friend FdIndex build_fd_index(const Catalog& catalog, const EmbeddingProvider& provider);

  std::string provider_name_;
  std::vector<const FunctionDefinition*> definitions_;  // ascending name
  VectorIndex vectors_;
};

// Definitions are borrowed from `catalog`, which must outlive the index.
// Throws EmptyCatalog or EmbedError.
FdIndex build_fd_index(const Catalog& catalog, const EmbeddingProvider& provider);

struct ScoredDefinition {
  const FunctionDefinition* definition = nullptr;
  double score = 0.0;
};

// Top-k by cosine, ties by ascending function name. Throws ProviderMismatch.
std::vector<ScoredDefinition> retrieve_semantic_fds(const FdIndex& index, std::string_view query,
                                                    std::size_t k, const EmbeddingProvider& provider);

struct ManifestEntry {
  std::string kind;    // "shot", "fd", "sfd"
  std::string id;      // example id or function name
  std::string status;  // "included" or "dropped"
  std::string reason;  // drop reason: "budget", "duplicate", "missing_from_catalog", "limit"
};

struct AssembledPrompt {
  std::string system_text;
  std::string user_text;
  std::vector<std::pair<std::string, std::string>> shots;  // (nl, dsl), most similar last
  std::vector<std::string> fd_blocks;                       // regular first, then semantic
  std::vector<std::string> fd_names;                        // parallel to fd_blocks
  std::size_t token_estimate = 0;
  std::vector<ManifestEntry> manifest;
  std::string template_id;
  std::string template_hash;

  std::string text() const { return system_text + user_text; }
  ChatRequest to_chat_request(std::string id) const;
  Json manifest_json() const;
};

// Layout: instructions, FD blocks (regular, then semantic not already
// present), shots with the most similar last, then the query. While over
// budget, drops semantic FDs from the lowest score, then regular FDs of the
// least similar shots, then the least similar shots. Throws BudgetImpossible
// when the instructions and query alone exceed the budget.
//
// `shots` and `semantic` are ranked best first; `regular` is in
// first-occurrence order over the ranked shots.
AssembledPrompt assemble_metaprompt(const GroundingConfig& config, const PromptTemplate& tmpl,
                                    std::span<const ScoredExample> shots,
                                    std::span<const FunctionDefinition* const> regular,
                                    std::span<const ScoredDefinition> semantic,
                                    std::string_view query,
                                    const Tokenizer& tokenizer = CharHeuristicTokenizer{});

std::string render_shot(std::string_view nl, std::string_view dsl);

}  // namespace dslgen
