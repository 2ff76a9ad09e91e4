#pragma once

// Read-only HTTP/JSON query service. Query functions are pure over an
// immutable ServerState; only the layout cache mutates, behind a mutex.

#include <cstdint>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sciflow/corpus.hpp"
#include "sciflow/interplay.hpp"
#include "sciflow/metrics.hpp"
#include "sciflow/predictor.hpp"

namespace sciflow {

// Bounded LRU of serialized layout payloads keyed by request dump.
class LayoutCache {
 public:
  explicit LayoutCache(std::size_t capacity = 64) : capacity_(capacity) {}

  std::optional<std::string> get(const std::string& key);
  void put(const std::string& key, std::string body);
  std::size_t size() const;

 private:
  using Entry = std::pair<std::string, std::string>;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> entries_;  // most recent first
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

class ServerState {
 public:
  ServerState(std::shared_ptr<const Corpus> corpus, std::vector<MetricRecord> paper_metrics,
              std::vector<ResearcherMetrics> researcher_metrics,
              std::optional<PatentabilityTable> predictions = std::nullopt,
              std::map<std::string, std::optional<double>> p_index = {});

  // Loads manifest plus metrics.jsonl and researchers_metrics.jsonl from
  // `out`; predictions.jsonl and pindex.jsonl when present.
  static std::unique_ptr<ServerState> load(const std::filesystem::path& manifest,
                                           const std::filesystem::path& out,
                                           std::optional<YearRange> window = {});

  const Corpus& corpus() const { return *corpus_; }
  const CorpusView& view() const { return view_; }
  const MetricsTable& metrics() const { return metrics_; }
  const std::vector<std::optional<ResearcherMetrics>>& researcher_metrics() const {
    return researcher_metrics_;
  }
  const PatentabilityTable* predictions() const { return predictions_ ? &*predictions_ : nullptr; }
  const PaperScores* scores() const { return predictions_ ? &scores_ : nullptr; }
  std::optional<double> p_index(std::string_view researcher_id) const;

  LayoutCache& cache() const { return cache_; }

 private:
  std::shared_ptr<const Corpus> corpus_;
  CorpusView view_;
  MetricsTable metrics_;
  std::vector<std::optional<ResearcherMetrics>> researcher_metrics_;  // by corpus researcher
  std::optional<PatentabilityTable> predictions_;
  PaperScores scores_;
  std::map<std::string, std::optional<double>> p_index_;
  mutable LayoutCache cache_;
};

// Query failures carry the HTTP status they map to.
class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kResearcherAxes[] = {
    "paper_count",          "avg_science_citation_5y",    "papers_cited_by_patents",
    "citing_patent_count",  "patent_citation_count",      "invention_disclosure_count",
    "granted_patent_count", "p_index"};

std::optional<double> researcher_axis(const ResearcherMetrics& m, std::optional<double> p_index,
                                      std::string_view axis);

// Gaussian kernel density over 2-D points with Scott's rule bandwidth
// h = sigma * n^(-1/6) per axis (sigma = 1 for a degenerate axis). The
// density is a sum of unit-mass kernels, so it integrates to ~n over a
// grid padded by 3h.
struct DensityGrid {
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> density;  // row-major, ys.size() rows of xs.size()
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;

  double integral() const;
  json to_json() const;
};
std::optional<DensityGrid> kernel_density(const std::vector<std::pair<double, double>>& points,
                                          int grid = 64);

json query_researchers(const ServerState& s, std::string_view x_axis, std::string_view y_axis,
                       const QueryFilter& filter);
json query_researcher(const ServerState& s, std::string_view id);
json query_stats(const ServerState& s, const QueryFilter& filter);
// Serialized layout payload, cached.
std::string query_interplay(const ServerState& s, const InterplayRequest& request);
json query_timeline(const ServerState& s, const std::vector<std::string>& ids, TimelineKind kind,
                    const QueryFilter& filter);
json query_assignees(const ServerState& s, const QueryFilter& filter, int k);
json query_papers(const ServerState& s, const QueryFilter& filter, std::string_view rank,
                  int limit, int offset);

// Lowercase tokens of length >= 3 that are not stopwords or numbers.
std::vector<std::string> keywords(std::string_view title);

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string etag;
};

// Routes one GET request. Errors become {code, message} with status 400 or
// 404; a matching If-None-Match yields 304 with an empty body.
HttpResponse handle_request(const ServerState& s, const std::string& path,
                            const std::multimap<std::string, std::string>& params,
                            const std::string& if_none_match = {});

// Blocking HTTP server over handle_request.
class HttpService {
 public:
  explicit HttpService(const ServerState& state);
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds (port 0 picks a free one) and returns the bound port; throws
  // IoError when binding fails.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sciflow
