#include "dslgen/grounding.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "builtin_templates.hpp"
#include "dslgen/errors.hpp"
#include "dslgen/util.hpp"

namespace dslgen {

void GroundingConfig::validate() const {
  if (use_sfd && sfd_k == 0) throw ConfigError("sfd_k must be at least 1 when semantic definitions are enabled");
  if (token_budget == 0) throw ConfigError("token_budget must be positive");
  if (instruction_template.empty()) throw ConfigError("instruction_template is empty");
}

Json GroundingConfig::to_json() const {
  Json j;
  j["n_shots"] = n_shots;
  j["use_fd"] = use_fd;
  j["use_sfd"] = use_sfd;
  j["sfd_k"] = sfd_k;
  j["token_budget"] = token_budget;
  j["instruction_template"] = instruction_template;
  return j;
}

GroundingConfig GroundingConfig::from_json(const Json& j) {
  GroundingConfig c;
  try {
    c.n_shots = j.value("n_shots", c.n_shots);
    c.use_fd = j.value("use_fd", c.use_fd);
    c.use_sfd = j.value("use_sfd", c.use_sfd);
    c.sfd_k = j.value("sfd_k", c.sfd_k);
    c.token_budget = j.value("token_budget", c.token_budget);
    c.instruction_template = j.value("instruction_template", c.instruction_template);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grounding: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- templates

std::string PromptTemplate::content_hash() const { return sha256_hex(text); }

PromptTemplate PromptTemplate::from_text(std::string id, std::string text) {
  return PromptTemplate{std::move(id), std::move(text)};
}

PromptTemplate PromptTemplate::resolve(std::string_view id_or_path) {
  if (id_or_path == "default-v1") return from_text("default-v1", builtin_templates::kDefaultV1);
  if (id_or_path == "nl-description-v1") {
    return from_text("nl-description-v1", builtin_templates::kNlDescriptionV1);
  }
  const std::filesystem::path path{std::string(id_or_path)};
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw ConfigError("unknown template " + std::string(id_or_path));
  }
  return from_text(path.string(), read_file(path));
}

void PromptTemplate::require(std::initializer_list<std::string_view> names) const {
  for (auto name : names) {
    const std::string tag = "{{" + std::string(name) + "}}";
    if (text.find(tag) == std::string::npos) {
      throw ConfigError("template " + id + " lacks the " + tag + " placeholder");
    }
  }
}

namespace {

const std::string* find_value(const std::vector<std::pair<std::string, std::string>>& values,
                              std::string_view name) {
  for (const auto& [k, v] : values) {
    if (k == name) return &v;
  }
  return nullptr;
}

// Section markers sit on their own line: "{{#name}}" or "{{/name}}".
bool section_marker(std::string_view line, char sigil, std::string& name) {
  const auto t = trim(line);
  if (t.size() < 5 || t.compare(0, 2, "{{") != 0 || t[2] != sigil || t.compare(t.size() - 2, 2, "}}") != 0) {
    return false;
  }
  name = t.substr(3, t.size() - 5);
  return true;
}

std::string render_text(std::string_view text, const std::vector<std::pair<std::string, std::string>>& values) {
  // Pass 1: sections.
  std::string kept;
  std::vector<bool> hidden;  // stack of enclosing sections
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    const bool last = nl == std::string_view::npos;
    if (last) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    std::string name;
    if (section_marker(line, '#', name)) {
      const auto* v = find_value(values, name);
      hidden.push_back(v == nullptr || v->empty());
    } else if (section_marker(line, '/', name)) {
      if (!hidden.empty()) hidden.pop_back();
    } else if (std::none_of(hidden.begin(), hidden.end(), [](bool h) { return h; })) {
      kept.append(line);
      if (!last) kept.push_back('\n');
    }
    if (last) break;
    pos = nl + 1;
  }

  // Pass 2: placeholders. Substituted values are not rescanned.
  std::string out;
  out.reserve(kept.size());
  pos = 0;
  while (pos < kept.size()) {
    const auto open = kept.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = kept.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(kept, pos, open - pos);
    const auto name = std::string_view(kept).substr(open + 2, close - open - 2);
    if (const auto* v = find_value(values, name)) {
      out += *v;
    } else {
      out.append(kept, open, close + 2 - open);
    }
    pos = close + 2;
  }
  out.append(kept, pos, std::string::npos);
  return out;
}

}  // namespace

std::string PromptTemplate::render(const std::vector<std::pair<std::string, std::string>>& values) const {
  return render_text(text, values);
}

// ---- definitions

FdSelection extract_fds_for_shots(std::span<const ExamplePair> shots, const Catalog& catalog) {
  FdSelection sel;
  std::unordered_set<ApiName> seen;
  for (const auto& shot : shots) {
    for (const auto& name : extract_actions(parse(shot.dsl))) {
      if (!seen.insert(name).second) continue;
      if (const auto* def = catalog.lookup(name)) {
        sel.definitions.push_back(def);
      } else {
        sel.missing.push_back(name);
      }
    }
  }
  return sel;
}

FdIndex build_fd_index(const Catalog& catalog, const EmbeddingProvider& provider) {
  if (catalog.empty()) throw EmptyCatalog("cannot index an empty catalog");
  FdIndex index;
  index.provider_name_ = provider.name();
  index.definitions_ = catalog.definitions();
  std::vector<std::string> keys, texts;
  for (const auto* def : index.definitions_) {
    keys.push_back(def->function_name.str());
    texts.push_back(render_fd(*def));
  }
  auto vectors = provider.embed(texts);
  if (vectors.size() != texts.size()) throw EmbedError("provider returned the wrong number of vectors");
  index.vectors_ = VectorIndex::build(std::move(keys), std::move(vectors));
  return index;
}

std::vector<ScoredDefinition> retrieve_semantic_fds(const FdIndex& index, std::string_view query,
                                                    std::size_t k, const EmbeddingProvider& provider) {
  if (provider.name() != index.provider_name()) {
    throw ProviderMismatch("definition index was built with " + index.provider_name() + ", query uses " +
                           provider.name());
  }
  std::vector<ScoredDefinition> out;
  if (k == 0) return out;
  for (const auto& hit : index.vectors().search(provider.embed_one(query), k)) {
    out.push_back({index.definitions()[hit.row], hit.score});
  }
  return out;
}

// ---- assembly

std::string render_shot(std::string_view nl, std::string_view dsl) {
  std::string s = "Query: ";
  s += squash_whitespace(nl);
  s += "\nFlow: <START>";
  s += dsl;
  s += "<END>";
  return s;
}

ChatRequest AssembledPrompt::to_chat_request(std::string id) const {
  ChatRequest req;
  req.id = std::move(id);
  if (!system_text.empty()) req.messages.push_back({"system", system_text});
  req.messages.push_back({"user", user_text});
  return req;
}

Json AssembledPrompt::manifest_json() const {
  Json j;
  j["template_id"] = template_id;
  j["template_hash"] = template_hash;
  j["token_estimate"] = token_estimate;
  j["entries"] = Json::array();
  for (const auto& e : manifest) {
    Json row;
    row["kind"] = e.kind;
    row["id"] = e.id;
    row["status"] = e.status;
    if (!e.reason.empty()) row["reason"] = e.reason;
    j["entries"].push_back(std::move(row));
  }
  return j;
}

namespace {

struct Layout {
  std::string system_text;
  std::string user_text;
};

template <typename T>
std::string join_blocks(const std::vector<T>& blocks) {
  std::string out;
  for (const auto& b : blocks) {
    if (!out.empty()) out += "\n\n";
    out += b;
  }
  return out;
}

Layout lay_out(const PromptTemplate& tmpl, const std::vector<std::string>& fd_blocks,
               const std::vector<std::string>& shot_blocks, std::string_view query) {
  const std::vector<std::pair<std::string, std::string>> values = {
      {"fds", join_blocks(fd_blocks)},
      {"shots", join_blocks(shot_blocks)},
      {"query", squash_whitespace(query)},
  };
  const auto q = tmpl.text.find("{{query}}");
  const auto line_start = tmpl.text.rfind('\n', q);
  const auto split = line_start == std::string::npos ? 0 : line_start + 1;
  Layout out;
  out.system_text = render_text(std::string_view(tmpl.text).substr(0, split), values);
  out.user_text = render_text(std::string_view(tmpl.text).substr(split), values);
  return out;
}

}  // namespace

AssembledPrompt assemble_metaprompt(const GroundingConfig& config, const PromptTemplate& tmpl,
                                    std::span<const ScoredExample> shots,
                                    std::span<const FunctionDefinition* const> regular,
                                    std::span<const ScoredDefinition> semantic,
                                    std::string_view query, const Tokenizer& tokenizer) {
  config.validate();
  tmpl.require({"query"});

  AssembledPrompt out;
  out.template_id = tmpl.id;
  out.template_hash = tmpl.content_hash();

  // Candidate lists; each is dropped from the back.
  std::vector<const ScoredExample*> shot_keep;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    if (i < config.n_shots) {
      shot_keep.push_back(&shots[i]);
    } else {
      out.manifest.push_back({"shot", shots[i].pair.id, "dropped", "limit"});
    }
  }
  std::vector<const FunctionDefinition*> fd_keep;
  std::set<std::string> fd_names;
  if (config.use_fd) {
    for (const auto* def : regular) {
      if (fd_names.insert(def->function_name.str()).second) fd_keep.push_back(def);
    }
  }
  std::vector<const FunctionDefinition*> sfd_keep;
  if (config.use_sfd) {
    for (std::size_t i = 0; i < semantic.size(); ++i) {
      const auto* def = semantic[i].definition;
      const auto name = def->function_name.str();
      if (i >= config.sfd_k) {
        out.manifest.push_back({"sfd", name, "dropped", "limit"});
      } else if (!fd_names.insert(name).second) {
        out.manifest.push_back({"sfd", name, "dropped", "duplicate"});
      } else {
        sfd_keep.push_back(def);
      }
    }
  }

  auto render_all = [&](Layout& layout) {
    std::vector<std::string> fd_blocks, shot_blocks;
    for (const auto* d : fd_keep) fd_blocks.push_back(render_fd(*d));
    for (const auto* d : sfd_keep) fd_blocks.push_back(render_fd(*d));
    for (auto it = shot_keep.rbegin(); it != shot_keep.rend(); ++it) {
      shot_blocks.push_back(render_shot((*it)->pair.nl, (*it)->pair.dsl));
    }
    layout = lay_out(tmpl, fd_blocks, shot_blocks, query);
    return tokenizer.count(layout.system_text + layout.user_text);
  };

  {
    Layout bare;
    const auto minimal = [&] {
      auto saved_shots = std::move(shot_keep);
      auto saved_fd = std::move(fd_keep);
      auto saved_sfd = std::move(sfd_keep);
      shot_keep.clear();
      fd_keep.clear();
      sfd_keep.clear();
      const auto n = render_all(bare);
      shot_keep = std::move(saved_shots);
      fd_keep = std::move(saved_fd);
      sfd_keep = std::move(saved_sfd);
      return n;
    }();
    if (minimal > config.token_budget) {
      throw BudgetImpossible("instructions and query need " + std::to_string(minimal) +
                             " tokens, budget is " + std::to_string(config.token_budget));
    }
  }

  std::vector<ManifestEntry> dropped;
  Layout layout;
  std::size_t tokens = render_all(layout);
  while (tokens > config.token_budget) {
    if (!sfd_keep.empty()) {
      dropped.push_back({"sfd", sfd_keep.back()->function_name.str(), "dropped", "budget"});
      sfd_keep.pop_back();
    } else if (!fd_keep.empty()) {
      dropped.push_back({"fd", fd_keep.back()->function_name.str(), "dropped", "budget"});
      fd_keep.pop_back();
    } else {
      // Non-empty here, since the bare prompt fits.
      dropped.push_back({"shot", shot_keep.back()->pair.id, "dropped", "budget"});
      shot_keep.pop_back();
    }
    tokens = render_all(layout);
  }

  std::vector<ManifestEntry> manifest;
  for (const auto* s : shot_keep) manifest.push_back({"shot", s->pair.id, "included", ""});
  for (const auto* d : fd_keep) manifest.push_back({"fd", d->function_name.str(), "included", ""});
  for (const auto* d : sfd_keep) manifest.push_back({"sfd", d->function_name.str(), "included", ""});
  manifest.insert(manifest.end(), dropped.begin(), dropped.end());
  manifest.insert(manifest.end(), out.manifest.begin(), out.manifest.end());
  out.manifest = std::move(manifest);

  out.system_text = std::move(layout.system_text);
  out.user_text = std::move(layout.user_text);
  for (auto it = shot_keep.rbegin(); it != shot_keep.rend(); ++it) {
    out.shots.emplace_back((*it)->pair.nl, (*it)->pair.dsl);
  }
  for (const auto* d : fd_keep) {
    out.fd_blocks.push_back(render_fd(*d));
    out.fd_names.push_back(d->function_name.str());
  }
  for (const auto* d : sfd_keep) {
    out.fd_blocks.push_back(render_fd(*d));
    out.fd_names.push_back(d->function_name.str());
  }
  out.token_estimate = tokens;
  return out;
}

}  // namespace dslgen
