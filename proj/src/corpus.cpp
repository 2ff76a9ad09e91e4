#include "sciflow/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "sciflow/error.hpp"

namespace sciflow {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void sort_unique(std::vector<Index>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

int parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError("expected an integer, got '" + std::string(s) + "'");
  return v;
}

}  // namespace

YearRange parse_year_range(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos)
    throw ValidationError("year range must look like LO:HI, got '" + std::string(text) + "'");
  YearRange r{parse_int(text.substr(0, colon)), parse_int(text.substr(colon + 1))};
  if (r.lo > r.hi) throw ValidationError("empty year range '" + std::string(text) + "'");
  return r;
}

std::string_view to_string(AssigneeClass c) {
  switch (c) {
    case AssigneeClass::University:
      return "University";
    case AssigneeClass::Company:
      return "Company";
    case AssigneeClass::Other:
      return "Other";
  }
  return "Other";
}

AssigneeClass assignee_class_from_string(std::string_view s) {
  const auto l = lowercase(s);
  if (l == "university") return AssigneeClass::University;
  if (l == "company") return AssigneeClass::Company;
  if (l == "other") return AssigneeClass::Other;
  throw ValidationError("unknown assignee class '" + std::string(s) + "'");
}

// ---- Hierarchy ----

Hierarchy::Hierarchy(std::vector<HierarchyNode> nodes, int max_level, std::string name)
    : nodes_(std::move(nodes)), max_level_(max_level) {
  const auto n = nodes_.size();
  parents_.assign(n, std::nullopt);
  children_.assign(n, {});
  for (Index i = 0; i < n; ++i) {
    if (!by_id_.emplace(nodes_[i].id, i).second)
      throw ValidationError(name + ": duplicate id '" + nodes_[i].id + "'");
  }
  for (Index i = 0; i < n; ++i) {
    const auto& node = nodes_[i];
    if (node.level < 0 || node.level > max_level)
      throw ValidationError(name + ": node '" + node.id + "' has level " +
                            std::to_string(node.level) + " outside 0.." +
                            std::to_string(max_level));
    if (!node.parent_id) {
      if (node.level != 0)
        throw ValidationError(name + ": root '" + node.id + "' must have level 0");
      roots_.push_back(i);
      continue;
    }
    auto it = by_id_.find(*node.parent_id);
    if (it == by_id_.end())
      throw ValidationError(name + ": dangling reference: parent '" + *node.parent_id +
                            "' of '" + node.id + "'");
    if (nodes_[it->second].level + 1 != node.level)
      throw ValidationError(name + ": node '" + node.id + "' level must be parent level + 1");
    parents_[i] = it->second;
    children_[it->second].push_back(i);
  }
  auto by_label_id = [this](Index a, Index b) { return nodes_[a].id < nodes_[b].id; };
  std::sort(roots_.begin(), roots_.end(), by_label_id);
  for (auto& c : children_) std::sort(c.begin(), c.end(), by_label_id);
}

std::optional<Index> Hierarchy::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

Index Hierarchy::at(std::string_view id) const {
  auto i = find(id);
  if (!i) throw ValidationError("unknown hierarchy id '" + std::string(id) + "'");
  return *i;
}

std::optional<Index> Hierarchy::ancestor_at(Index i, int level) const {
  if (nodes_[i].level < level) return std::nullopt;
  while (nodes_[i].level > level) i = *parents_[i];
  return i;
}

bool Hierarchy::is_descendant_or_self(Index node, Index ancestor) const {
  const int target = nodes_[ancestor].level;
  auto a = ancestor_at(node, target);
  return a && *a == ancestor;
}

std::vector<Index> Hierarchy::nodes_at_level(int level) const {
  std::vector<Index> out;
  for (Index i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].level == level) out.push_back(i);
  std::sort(out.begin(), out.end(), [this](Index a, Index b) { return nodes_[a].id < nodes_[b].id; });
  return out;
}

// ---- Assignee rules ----

AssigneeRules AssigneeRules::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("assignee rules must be a JSON object");
  AssigneeRules r;
  r.university = string_list(j, "university");
  r.company = string_list(j, "company");
  return r;
}

json AssigneeRules::to_json() const { return json{{"university", university}, {"company", company}}; }

AssigneeClass classify_assignee(std::string_view name, const AssigneeRules& rules) {
  const auto hay = lowercase(name);
  auto any = [&](const std::vector<std::string>& keywords) {
    return std::any_of(keywords.begin(), keywords.end(), [&](const std::string& k) {
      return !k.empty() && hay.find(lowercase(k)) != std::string::npos;
    });
  };
  if (any(rules.university)) return AssigneeClass::University;
  if (any(rules.company)) return AssigneeClass::Company;
  return AssigneeClass::Other;
}

// ---- Reading ----

IngestManifest IngestManifest::load(const std::filesystem::path& manifest_path) {
  const auto j = read_json_file(manifest_path);
  if (!j.is_object()) throw ValidationError("manifest must be a JSON object");
  const auto base = manifest_path.parent_path();
  auto path_of = [&](const char* key) {
    std::filesystem::path p;
    try {
      p = require_string(j, key);
    } catch (const ValidationError&) {
      throw ValidationError(std::string("manifest: missing path '") + key + "'");
    }
    return p.is_absolute() ? p : base / p;
  };
  IngestManifest m;
  m.papers = path_of("papers");
  m.patents = path_of("patents");
  m.paper_citations = path_of("paper_citations");
  m.paper_patent_citations = path_of("paper_patent_citations");
  m.researchers = path_of("researchers");
  m.fields = path_of("fields");
  m.cpc = path_of("cpc");
  m.assignee_rules = path_of("assignee_rules");
  if (auto o = optional_string(j, "overrides")) {
    std::filesystem::path p = *o;
    m.overrides = p.is_absolute() ? p : base / p;
  }
  if (auto it = j.find("window"); it != j.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2)
      throw ValidationError("manifest: window must be [lo, hi]");
    YearRange w{(*it)[0].get<int>(), (*it)[1].get<int>()};
    if (w.lo > w.hi) throw ValidationError("manifest: empty window");
    m.window = w;
  }
  return m;
}

namespace {

int parse_level(const json& v, int max_level) {
  if (v.is_number_integer()) return v.get<int>();
  if (!v.is_string()) throw ValidationError("malformed row: 'level' must be int or string");
  const auto s = lowercase(v.get<std::string>());
  if (max_level == 3 && s.size() == 2 && s[0] == 'l') return parse_int(s.substr(1));
  if (max_level == 2) {
    if (s == "section") return 0;
    if (s == "subsection") return 1;
    if (s == "group") return 2;
  }
  throw ValidationError("malformed row: unknown level '" + v.get<std::string>() + "'");
}

std::vector<HierarchyNode> read_hierarchy(const std::filesystem::path& path, int max_level) {
  std::vector<HierarchyNode> nodes;
  for_each_jsonl(path, [&](const json& o, std::size_t) {
    HierarchyNode n;
    n.id = require_string(o, "id");
    n.label = optional_string(o, "label").value_or(n.id);
    n.level = parse_level(require_key(o, "level"), max_level);
    n.parent_id = optional_string(o, "parent_id");
    nodes.push_back(std::move(n));
  });
  return nodes;
}

int nonneg(int v, const char* key) {
  if (v < 0) throw ValidationError(std::string("malformed row: '") + key + "' must be >= 0");
  return v;
}

Paper parse_paper(const json& o) {
  Paper p;
  p.id = require_string(o, "id");
  p.title = optional_string(o, "title").value_or("");
  p.year = require_int(o, "year");
  p.venue_id = optional_string(o, "venue_id");
  p.field_ids = string_list(o, "field_ids");
  p.author_ids = string_list(o, "author_ids");
  p.reference_ids = string_list(o, "reference_ids");
  p.grant_count = nonneg(optional_int(o, "grant_count").value_or(0), "grant_count");
  if (auto it = o.find("grant_breakdown"); it != o.end() && !it->is_null()) {
    if (!it->is_object()) throw ValidationError("malformed row: 'grant_breakdown' must be an object");
    for (auto& [k, v] : it->items()) p.grant_breakdown[k] = v.get<int>();
  }
  return p;
}

CpcCode parse_cpc(const json& v) {
  if (v.is_array() && v.size() == 3 && v[0].is_string() && v[1].is_string() && v[2].is_string())
    return {v[0].get<std::string>(), v[1].get<std::string>(), v[2].get<std::string>()};
  if (v.is_object())
    return {require_string(v, "section"), require_string(v, "subsection"),
            require_string(v, "group")};
  throw ValidationError("malformed row: cpc code must be [section, subsection, group]");
}

Patent parse_patent(const json& o) {
  Patent p;
  p.id = require_string(o, "id");
  p.title = optional_string(o, "title").value_or("");
  p.application_year = require_int(o, "application_year");
  p.assignee_name = optional_string(o, "assignee_name").value_or("");
  if (auto it = o.find("cpc_codes"); it != o.end() && !it->is_null()) {
    if (!it->is_array()) throw ValidationError("malformed row: 'cpc_codes' must be a list");
    for (const auto& c : *it) p.cpc_codes.push_back(parse_cpc(c));
  }
  return p;
}

Researcher parse_researcher(const json& o) {
  Researcher r;
  r.id = require_string(o, "id");
  r.name = optional_string(o, "name").value_or("");
  if (auto g = optional_string(o, "gender")) {
    const auto s = lowercase(*g);
    if (s == "female") r.gender = Gender::Female;
    else if (s == "male") r.gender = Gender::Male;
    else if (s == "other") r.gender = Gender::Other;
    else throw ValidationError("malformed row: unknown gender '" + *g + "'");
  }
  r.rank = optional_string(o, "rank");
  r.affiliation = optional_string(o, "affiliation");
  r.paper_ids = string_list(o, "paper_ids");
  if (auto v = optional_int(o, "invention_disclosure_count"))
    r.invention_disclosure_count = nonneg(*v, "invention_disclosure_count");
  if (auto v = optional_int(o, "granted_patent_count"))
    r.granted_patent_count = nonneg(*v, "granted_patent_count");
  return r;
}

}  // namespace

CorpusData read_corpus_data(const IngestManifest& m) {
  CorpusData d;
  for_each_jsonl(m.papers, [&](const json& o, std::size_t) { d.papers.push_back(parse_paper(o)); });
  for_each_jsonl(m.patents, [&](const json& o, std::size_t) { d.patents.push_back(parse_patent(o)); });
  d.paper_citations = read_csv_pairs(m.paper_citations, "citing_id", "cited_id");
  d.paper_patent_citations = read_csv_pairs(m.paper_patent_citations, "patent_id", "paper_id");
  for_each_jsonl(m.researchers,
                 [&](const json& o, std::size_t) { d.researchers.push_back(parse_researcher(o)); });
  d.fields = read_hierarchy(m.fields, 3);
  d.cpc = read_hierarchy(m.cpc, 2);
  d.rules = AssigneeRules::from_json(read_json_file(m.assignee_rules));
  if (m.overrides) {
    const auto o = read_json_file(*m.overrides);
    if (!o.is_object()) throw ValidationError("overrides must map assignee_name to class");
    for (auto& [name, cls] : o.items())
      d.overrides[name] = assignee_class_from_string(cls.get<std::string>());
  }
  return d;
}

json IngestReport::to_json() const {
  return json{{"papers_outside_window", papers_outside_window},
              {"references_to_dropped_papers", references_to_dropped_papers},
              {"patents_without_cpc", patents_without_cpc},
              {"patent_links_to_dropped", patent_links_to_dropped},
              {"duplicate_patent_links", duplicate_patent_links},
              {"researcher_papers_dropped", researcher_papers_dropped}};
}

// ---- Corpus ----

std::shared_ptr<const Corpus> Corpus::build(CorpusData data, const CorpusOptions& options) {
  std::shared_ptr<Corpus> c(new Corpus());
  c->window_ = options.window;
  c->fields_ = Hierarchy(std::move(data.fields), 3, "fields");
  c->cpc_ = Hierarchy(std::move(data.cpc), 2, "cpc");
  auto& report = c->report_;

  // Papers: ids seen anywhere in the input vs. ids kept after the window cut.
  std::unordered_map<std::string, bool> seen_paper;  // id -> kept
  for (auto& p : data.papers) {
    if (seen_paper.count(p.id)) throw ValidationError("duplicate id: paper '" + p.id + "'");
    const bool keep = options.window.contains(p.year);
    seen_paper.emplace(p.id, keep);
    if (!keep) {
      ++report.papers_outside_window;
      continue;
    }
    c->paper_by_id_.emplace(p.id, static_cast<Index>(c->papers_.size()));
    c->papers_.push_back(std::move(p));
  }
  const auto np = c->papers_.size();
  c->references_.assign(np, {});
  c->citers_.assign(np, {});
  c->paper_fields_.assign(np, {});
  c->citing_patents_.assign(np, {});
  c->paper_researchers_.assign(np, {});

  // Returns the kept index, nullopt for a dropped paper; throws if never seen.
  auto resolve_paper = [&](const std::string& id, const std::string& context)
      -> std::optional<Index> {
    auto it = seen_paper.find(id);
    if (it == seen_paper.end())
      throw ValidationError("dangling reference: " + context + " -> paper '" + id + "'");
    if (!it->second) return std::nullopt;
    return c->paper_by_id_.at(id);
  };

  auto add_reference = [&](Index citing, const std::string& cited_id) {
    if (c->papers_[citing].id == cited_id)
      throw ValidationError("self reference: paper '" + cited_id + "'");
    auto cited = resolve_paper(cited_id, "paper '" + c->papers_[citing].id + "'");
    if (!cited) {
      ++report.references_to_dropped_papers;
      return;
    }
    c->references_[citing].push_back(*cited);
  };

  for (Index i = 0; i < np; ++i) {
    const auto& p = c->papers_[i];
    for (const auto& f : p.field_ids) {
      auto fi = c->fields_.find(f);
      if (!fi) throw ValidationError("dangling reference: paper '" + p.id + "' -> field '" + f + "'");
      c->paper_fields_[i].push_back(*fi);
    }
    sort_unique(c->paper_fields_[i]);
    for (const auto& r : p.reference_ids) add_reference(i, r);
  }
  for (const auto& [citing_id, cited_id] : data.paper_citations) {
    auto citing = resolve_paper(citing_id, "paper_citations");
    if (!citing) {
      // Still reject unknown targets even when the citing side was dropped.
      if (!seen_paper.count(cited_id))
        throw ValidationError("dangling reference: paper_citations -> paper '" + cited_id + "'");
      ++report.references_to_dropped_papers;
      continue;
    }
    add_reference(*citing, cited_id);
  }
  for (Index i = 0; i < np; ++i) {
    sort_unique(c->references_[i]);
    c->paper_citation_count_ += c->references_[i].size();
    for (Index r : c->references_[i]) c->citers_[r].push_back(i);
  }

  // Patents.
  std::unordered_map<std::string, bool> seen_patent;
  for (auto& t : data.patents) {
    if (seen_patent.count(t.id)) throw ValidationError("duplicate id: patent '" + t.id + "'");
    if (t.cpc_codes.empty()) {
      seen_patent.emplace(t.id, false);
      ++report.patents_without_cpc;
      continue;
    }
    seen_patent.emplace(t.id, true);
    std::array<std::vector<Index>, 3> nodes;
    for (const auto& code : t.cpc_codes) {
      auto s = c->cpc_.find(code.section);
      auto ss = c->cpc_.find(code.subsection);
      auto g = c->cpc_.find(code.group);
      if (!s || !ss || !g || c->cpc_.node(*s).level != 0 || c->cpc_.parent(*ss) != s ||
          c->cpc_.parent(*g) != ss)
        throw ValidationError("dangling reference: patent '" + t.id + "' cpc code " +
                              code.section + "/" + code.subsection + "/" + code.group +
                              " does not resolve");
      nodes[0].push_back(*s);
      nodes[1].push_back(*ss);
      nodes[2].push_back(*g);
    }
    for (auto& v : nodes) sort_unique(v);
    auto ov = data.overrides.find(t.assignee_name);
    t.assignee_class = ov != data.overrides.end() ? ov->second
                                                  : classify_assignee(t.assignee_name, data.rules);
    c->patent_by_id_.emplace(t.id, static_cast<Index>(c->patents_.size()));
    c->patents_.push_back(std::move(t));
    c->patent_cpc_.push_back(std::move(nodes));
  }
  c->cited_papers_.assign(c->patents_.size(), {});

  for (const auto& [patent_id, paper_id] : data.paper_patent_citations) {
    auto pt = seen_patent.find(patent_id);
    if (pt == seen_patent.end())
      throw ValidationError("dangling reference: paper_patent_citations -> patent '" +
                            patent_id + "'");
    auto paper = resolve_paper(paper_id, "paper_patent_citations");
    if (!pt->second || !paper) {
      ++report.patent_links_to_dropped;
      continue;
    }
    c->cited_papers_[c->patent_by_id_.at(patent_id)].push_back(*paper);
  }
  for (Index t = 0; t < c->cited_papers_.size(); ++t) {
    auto& v = c->cited_papers_[t];
    const auto before = v.size();
    sort_unique(v);
    report.duplicate_patent_links += before - v.size();
    c->paper_patent_citation_count_ += v.size();
    for (Index p : v) c->citing_patents_[p].push_back(t);
  }

  // Researchers.
  for (auto& r : data.researchers) {
    if (c->researcher_by_id_.count(r.id))
      throw ValidationError("duplicate id: researcher '" + r.id + "'");
    const auto ri = static_cast<Index>(c->researchers_.size());
    std::vector<Index> papers;
    std::vector<std::string> kept_ids;
    for (const auto& pid : r.paper_ids) {
      auto p = resolve_paper(pid, "researcher '" + r.id + "'");
      if (!p) {
        ++report.researcher_papers_dropped;
        continue;
      }
      papers.push_back(*p);
      kept_ids.push_back(pid);
    }
    r.paper_ids = std::move(kept_ids);
    sort_unique(papers);
    c->researcher_by_id_.emplace(r.id, ri);
    c->researchers_.push_back(std::move(r));
    c->researcher_papers_.push_back(std::move(papers));
  }
  for (Index i = 0; i < np; ++i) {
    for (const auto& a : c->papers_[i].author_ids) {
      auto it = c->researcher_by_id_.find(a);
      if (it != c->researcher_by_id_.end()) c->paper_researchers_[i].push_back(it->second);
    }
    sort_unique(c->paper_researchers_[i]);
  }
  return c;
}

std::shared_ptr<const Corpus> Corpus::load(const std::filesystem::path& manifest_path,
                                           std::optional<YearRange> window_override) {
  const auto manifest = IngestManifest::load(manifest_path);
  CorpusOptions options;
  if (manifest.window) options.window = *manifest.window;
  if (window_override) options.window = *window_override;
  return build(read_corpus_data(manifest), options);
}

std::optional<Index> Corpus::find_paper(std::string_view id) const {
  auto it = paper_by_id_.find(std::string(id));
  return it == paper_by_id_.end() ? std::nullopt : std::optional<Index>(it->second);
}

std::optional<Index> Corpus::find_patent(std::string_view id) const {
  auto it = patent_by_id_.find(std::string(id));
  return it == patent_by_id_.end() ? std::nullopt : std::optional<Index>(it->second);
}

std::optional<Index> Corpus::find_researcher(std::string_view id) const {
  auto it = researcher_by_id_.find(std::string(id));
  return it == researcher_by_id_.end() ? std::nullopt : std::optional<Index>(it->second);
}

Index Corpus::paper_at(std::string_view id) const {
  auto i = find_paper(id);
  if (!i) throw ValidationError("unknown paper id '" + std::string(id) + "'");
  return *i;
}

Index Corpus::researcher_at(std::string_view id) const {
  auto i = find_researcher(id);
  if (!i) throw ValidationError("unknown researcher id '" + std::string(id) + "'");
  return *i;
}

namespace {

json hierarchy_json(const Hierarchy& h) {
  json out = json::array();
  for (Index i = 0; i < h.size(); ++i) {
    const auto& n = h.node(i);
    out.push_back({{"id", n.id}, {"label", n.label}, {"level", n.level},
                   {"parent_id", optional_to_json(n.parent_id)}});
  }
  return out;
}

}  // namespace

json Corpus::snapshot() const {
  json papers = json::array();
  for (Index i = 0; i < papers_.size(); ++i) {
    const auto& p = papers_[i];
    std::vector<std::string> refs;
    for (Index r : references_[i]) refs.push_back(papers_[r].id);
    papers.push_back({{"id", p.id},
                      {"title", p.title},
                      {"year", p.year},
                      {"venue_id", optional_to_json(p.venue_id)},
                      {"field_ids", p.field_ids},
                      {"author_ids", p.author_ids},
                      {"reference_ids", refs},
                      {"grant_count", p.grant_count},
                      {"grant_breakdown", p.grant_breakdown}});
  }
  json patents = json::array();
  for (const auto& t : patents_) {
    json codes = json::array();
    for (const auto& c : t.cpc_codes) codes.push_back({c.section, c.subsection, c.group});
    patents.push_back({{"id", t.id},
                       {"title", t.title},
                       {"application_year", t.application_year},
                       {"assignee_name", t.assignee_name},
                       {"assignee_class", to_string(t.assignee_class)},
                       {"cpc_codes", codes}});
  }
  json links = json::array();
  for (Index t = 0; t < patents_.size(); ++t)
    for (Index p : cited_papers_[t]) links.push_back({patents_[t].id, papers_[p].id});
  json researchers = json::array();
  for (const auto& r : researchers_) {
    json gender = nullptr;
    if (r.gender)
      gender = *r.gender == Gender::Female ? "female" : *r.gender == Gender::Male ? "male" : "other";
    researchers.push_back({{"id", r.id},
                           {"name", r.name},
                           {"gender", gender},
                           {"rank", optional_to_json(r.rank)},
                           {"affiliation", optional_to_json(r.affiliation)},
                           {"paper_ids", r.paper_ids},
                           {"invention_disclosure_count", optional_to_json(r.invention_disclosure_count)},
                           {"granted_patent_count", optional_to_json(r.granted_patent_count)}});
  }
  return json{{"window", {window_.lo, window_.hi}},
              {"report", report_.to_json()},
              {"papers", papers},
              {"patents", patents},
              {"paper_patent_citations", links},
              {"researchers", researchers},
              {"fields", hierarchy_json(fields_)},
              {"cpc", hierarchy_json(cpc_)}};
}

// ---- Filtering ----

bool QueryFilter::empty() const {
  return !researcher_ids && !paper_year_range && !patent_year_range && !field_ids &&
         !cpc_prefixes && !min_patentability;
}

QueryFilter QueryFilter::from_json(const json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw ValidationError("filter must be a JSON object");
  static const std::set<std::string> known{"researcher_ids", "paper_year_range",
                                           "patent_year_range", "field_ids", "cpc_prefixes",
                                           "min_patentability"};
  for (auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError("filter: unknown key '" + k + "'");
  QueryFilter f;
  auto set_of = [&](const char* key) -> std::optional<std::set<std::string>> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    auto list = string_list(j, key);
    return std::set<std::string>(list.begin(), list.end());
  };
  auto range_of = [&](const char* key) -> std::optional<YearRange> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() ||
        !(*it)[1].is_number_integer())
      throw ValidationError(std::string("filter: '") + key + "' must be [lo, hi]");
    YearRange r{(*it)[0].get<int>(), (*it)[1].get<int>()};
    if (r.lo > r.hi) throw ValidationError(std::string("filter: '") + key + "' is empty");
    return r;
  };
  f.researcher_ids = set_of("researcher_ids");
  f.paper_year_range = range_of("paper_year_range");
  f.patent_year_range = range_of("patent_year_range");
  f.field_ids = set_of("field_ids");
  f.cpc_prefixes = set_of("cpc_prefixes");
  if (auto it = j.find("min_patentability"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw ValidationError("filter: 'min_patentability' must be a number");
    f.min_patentability = it->get<double>();
    if (*f.min_patentability < 0.0 || *f.min_patentability > 100.0)
      throw ValidationError("filter: 'min_patentability' must be in [0, 100]");
  }
  return f;
}

json QueryFilter::to_json() const {
  json j = json::object();
  if (researcher_ids) j["researcher_ids"] = *researcher_ids;
  if (paper_year_range) j["paper_year_range"] = {paper_year_range->lo, paper_year_range->hi};
  if (patent_year_range) j["patent_year_range"] = {patent_year_range->lo, patent_year_range->hi};
  if (field_ids) j["field_ids"] = *field_ids;
  if (cpc_prefixes) j["cpc_prefixes"] = *cpc_prefixes;
  if (min_patentability) j["min_patentability"] = *min_patentability;
  return j;
}

QueryFilter QueryFilter::conjoin(const QueryFilter& o) const {
  auto sets = [](const auto& a, const auto& b) -> std::optional<std::set<std::string>> {
    if (!a) return b;
    if (!b) return a;
    std::set<std::string> out;
    std::set_intersection(a->begin(), a->end(), b->begin(), b->end(),
                          std::inserter(out, out.end()));
    return out;
  };
  auto ranges = [](const auto& a, const auto& b) -> std::optional<YearRange> {
    if (!a) return b;
    if (!b) return a;
    return YearRange{std::max(a->lo, b->lo), std::min(a->hi, b->hi)};
  };
  QueryFilter f;
  f.researcher_ids = sets(researcher_ids, o.researcher_ids);
  f.paper_year_range = ranges(paper_year_range, o.paper_year_range);
  f.patent_year_range = ranges(patent_year_range, o.patent_year_range);
  f.field_ids = sets(field_ids, o.field_ids);
  f.cpc_prefixes = sets(cpc_prefixes, o.cpc_prefixes);
  if (min_patentability && o.min_patentability)
    f.min_patentability = std::max(*min_patentability, *o.min_patentability);
  else
    f.min_patentability = min_patentability ? min_patentability : o.min_patentability;
  return f;
}

CorpusView::CorpusView(std::shared_ptr<const Corpus> corpus) : corpus_(std::move(corpus)) {
  paper_mask_.assign(corpus_->paper_count(), 1);
  patent_mask_.assign(corpus_->patent_count(), 1);
  researcher_mask_.assign(corpus_->researcher_count(), 1);
  rebuild_lists();
}

void CorpusView::rebuild_lists() {
  auto collect = [](const std::vector<std::uint8_t>& mask, std::vector<Index>& out) {
    out.clear();
    for (Index i = 0; i < mask.size(); ++i)
      if (mask[i]) out.push_back(i);
  };
  collect(paper_mask_, papers_);
  collect(patent_mask_, patents_);
  collect(researcher_mask_, researchers_);
}

namespace {

std::vector<Index> keep(const std::vector<Index>& src, const std::vector<std::uint8_t>& mask) {
  std::vector<Index> out;
  out.reserve(src.size());
  for (Index i : src)
    if (mask[i]) out.push_back(i);
  return out;
}

}  // namespace

std::vector<Index> CorpusView::references(Index p) const { return keep(corpus_->references(p), paper_mask_); }
std::vector<Index> CorpusView::citers(Index p) const { return keep(corpus_->citers(p), paper_mask_); }
std::vector<Index> CorpusView::citing_patents(Index p) const {
  return keep(corpus_->citing_patents(p), patent_mask_);
}
std::vector<Index> CorpusView::cited_papers(Index t) const {
  return keep(corpus_->cited_papers(t), paper_mask_);
}
std::vector<Index> CorpusView::researcher_papers(Index r) const {
  return keep(corpus_->researcher_papers(r), paper_mask_);
}

std::size_t CorpusView::paper_patent_citation_count() const {
  std::size_t n = 0;
  for (Index t : patents_)
    for (Index p : corpus_->cited_papers(t)) n += paper_mask_[p];
  return n;
}

bool CorpusView::operator==(const CorpusView& o) const {
  return corpus_ == o.corpus_ && paper_mask_ == o.paper_mask_ && patent_mask_ == o.patent_mask_ &&
         researcher_mask_ == o.researcher_mask_;
}

bool paper_in_field(const Corpus& corpus, Index paper, Index field) {
  const auto& tags = corpus.paper_fields(paper);
  return std::any_of(tags.begin(), tags.end(), [&](Index t) {
    return corpus.fields().is_descendant_or_self(t, field);
  });
}

bool patent_has_cpc(const Corpus& corpus, Index patent, Index node) {
  const int level = corpus.cpc().node(node).level;
  const auto& nodes = corpus.patent_cpc_nodes(patent, level);
  return std::binary_search(nodes.begin(), nodes.end(), node);
}

void validate_filter(const Corpus& corpus, const QueryFilter& f) {
  if (f.researcher_ids)
    for (const auto& id : *f.researcher_ids)
      if (!corpus.find_researcher(id))
        throw ValidationError("filter: unknown researcher id '" + id + "'");
  if (f.field_ids)
    for (const auto& id : *f.field_ids)
      if (!corpus.fields().find(id)) throw ValidationError("filter: unknown field id '" + id + "'");
  if (f.cpc_prefixes)
    for (const auto& id : *f.cpc_prefixes)
      if (!corpus.cpc().find(id)) throw ValidationError("filter: unknown cpc id '" + id + "'");
  for (const auto* r : {&f.paper_year_range, &f.patent_year_range})
    if (*r && (*r)->lo > (*r)->hi) throw ValidationError("filter: empty year range");
}

CorpusView filter_view(const CorpusView& view, const QueryFilter& f, const PaperScores* scores) {
  const auto& c = view.corpus();
  validate_filter(c, f);
  if (f.min_patentability && !scores)
    throw ValidationError("filter: min_patentability requires patentability scores");
  CorpusView out = view;

  std::vector<std::uint8_t> by_researcher;
  if (f.researcher_ids) {
    by_researcher.assign(c.paper_count(), 0);
    for (const auto& id : *f.researcher_ids)
      for (Index p : c.researcher_papers(*c.find_researcher(id))) by_researcher[p] = 1;
  }
  std::vector<Index> fields;
  if (f.field_ids)
    for (const auto& id : *f.field_ids) fields.push_back(c.fields().at(id));
  std::vector<Index> cpcs;
  if (f.cpc_prefixes)
    for (const auto& id : *f.cpc_prefixes) cpcs.push_back(c.cpc().at(id));

  for (Index p : view.papers()) {
    bool ok = true;
    if (f.paper_year_range) ok = ok && f.paper_year_range->contains(c.paper(p).year);
    if (f.researcher_ids) ok = ok && by_researcher[p];
    if (f.field_ids)
      ok = ok && std::any_of(fields.begin(), fields.end(),
                             [&](Index fi) { return paper_in_field(c, p, fi); });
    if (f.min_patentability) {
      const auto& s = p < scores->size() ? (*scores)[p] : std::nullopt;
      ok = ok && s && *s >= *f.min_patentability;
    }
    out.paper_mask_[p] = ok;
  }
  for (Index t : view.patents()) {
    bool ok = true;
    if (f.patent_year_range) ok = ok && f.patent_year_range->contains(c.patent(t).application_year);
    if (f.cpc_prefixes)
      ok = ok && std::any_of(cpcs.begin(), cpcs.end(),
                             [&](Index n) { return patent_has_cpc(c, t, n); });
    out.patent_mask_[t] = ok;
  }
  if (f.researcher_ids)
    for (Index r : view.researchers()) out.researcher_mask_[r] = f.researcher_ids->count(c.researcher(r).id);
  out.rebuild_lists();
  return out;
}

std::set<std::string> researchers_with_patent_impact(const Corpus& corpus) {
  std::set<std::string> out;
  for (Index r = 0; r < corpus.researcher_count(); ++r) {
    const auto& papers = corpus.researcher_papers(r);
    if (std::any_of(papers.begin(), papers.end(),
                    [&](Index p) { return !corpus.citing_patents(p).empty(); }))
      out.insert(corpus.researcher(r).id);
  }
  return out;
}

}  // namespace sciflow
