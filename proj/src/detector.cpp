#include "loopdet/detector.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "loopdet/verification.h"

namespace loopdet {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void mean_std(const std::vector<double>& values, double* mean, double* std_dev) {
  if (values.empty()) {
    *mean = 0.0;
    *std_dev = 0.0;
    return;
  }
  double sum = 0.0;
  for (const double v : values) {
    sum += v;
  }
  *mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (const double v : values) {
    sq += (v - *mean) * (v - *mean);
  }
  *std_dev = std::sqrt(sq / static_cast<double>(values.size()));
}

// Descriptors linked to any landmark of the candidate set, gathered from the
// covisible vertices' projection caches.
std::vector<ProjectedDescriptor> landmark_payload(
    const MapDatabase& db, const std::vector<LandmarkId>& landmark_set) {
  const std::set<LandmarkId> wanted(landmark_set.begin(), landmark_set.end());
  std::set<VertexId> vertices;
  for (const LandmarkId lm : landmark_set) {
    for (const VertexId v : db.landmark(lm).observers) {
      vertices.insert(v);
    }
  }
  std::vector<ProjectedDescriptor> payload;
  for (const VertexId id : vertices) {
    const Vertex& v = db.vertex(id);
    if (v.projected.size() != v.raw_descriptors.size()) {
      continue;  // not projected yet (never admitted): nothing cached
    }
    for (std::size_t i = 0; i < v.projected.size(); ++i) {
      if (v.descriptor_landmarks[i] != kNoLandmark &&
          wanted.count(v.descriptor_landmarks[i])) {
        payload.push_back({v.projected[i], id, v.descriptor_landmarks[i]});
      }
    }
  }
  return payload;
}

}  // namespace

RunReport run_detector(const Dataset& dataset, const CalibratedModel& model,
                       const DetectorConfig& config, const RunHooks& hooks) {
  config.validate();
  if (config.mode == DetectorMode::kVertexToMap && !dataset.has_landmarks()) {
    throw DataError("vertex-to-map mode requires a dataset with landmarks");
  }
  if (!model.codebooks) {
    throw std::invalid_argument("run_detector: model carries no index codebooks");
  }

  RunReport report;
  const auto run_start = Clock::now();

  MapDatabase db;
  for (const auto& [id, observers] : dataset.landmarks) {
    (void)observers;
    db.declare_landmark(id);
  }
  InvertedMultiIndex index = InvertedMultiIndex::from_codebooks(
      model.codebooks->first, model.codebooks->second, config.index);

  std::vector<double> query_times;
  std::vector<double> add_times;
  query_times.reserve(dataset.vertices.size());
  add_times.reserve(dataset.vertices.size());

  for (const DatasetVertex& dv : dataset.vertices) {
    const VertexId id = db.add_vertex(dv.timestamp, dv.position, dv.descriptors,
                                      &dv.landmark_links);
    const double t_query = dv.timestamp;

    const auto add_start = Clock::now();
    admit_due_vertices(db, index, model.projection, t_query, config);
    add_times.push_back(ms_since(add_start));

    const auto query_start = Clock::now();
    const auto query_descriptors = project_vertex_descriptors(db, model.projection, id);

    VoteTally tally;
    if (index.size() > 0) {
      tally = config.mode == DetectorMode::kVertexToMap
                  ? aggregate_v2m(query_descriptors, index, db, config)
                  : aggregate_v2v(query_descriptors, index, config);
    }
    ++report.firewall_checks;
    if (!firewall_clear(tally, db, t_query, config.t_delay)) {
      throw std::logic_error("temporal firewall violated at query " +
                             std::to_string(id));
    }

    DetectionRecord record;
    record.query = id;
    record.total_votes = tally.total;
    record.database_descriptors = index.size();

    const auto best = best_scoring_vertex(tally, db, config);
    ScoreMap scores;
    const bool need_scores =
        static_cast<bool>(hooks.score_sink) ||
        (best && best->pmf < config.alpha &&
         config.mode == DetectorMode::kVertexToMap);
    if (need_scores) {
      scores = score_all(tally, db, config);
    }

    if (best) {
      record.has_candidate = true;
      record.matched = best->vertex;
      record.pmf = best->pmf;
      record.neg_log10_pmf = best->neg_log10_pmf;
      record.accepted = best->pmf < config.alpha;
      if (record.accepted && config.mode == DetectorMode::kVertexToMap) {
        record.landmarks = candidate_landmarks(db, best->vertex, scores, config);
      }
    }

    if (!tally.empty()) {
      record.has_baseline = true;
      std::vector<VertexId> voted;
      voted.reserve(tally.votes.size());
      for (const auto& [vertex, votes] : tally.votes) {
        (void)votes;
        voted.push_back(vertex);
      }
      std::sort(voted.begin(), voted.end());
      for (const VertexId vertex : voted) {
        const std::uint64_t votes = tally.count(vertex);
        if (votes > record.baseline_votes) {
          record.baseline_votes = votes;
          record.baseline_matched = vertex;
        }
      }
    }
    query_times.push_back(ms_since(query_start));

    if (record.accepted && config.verify) {
      std::vector<ProjectedDescriptor> candidate_payload;
      if (config.mode == DetectorMode::kVertexToMap) {
        candidate_payload = landmark_payload(db, record.landmarks);
      } else {
        candidate_payload =
            project_vertex_descriptors(db, model.projection, record.matched);
      }
      const VerificationResult vr =
          verify_stub(query_descriptors, candidate_payload, config.verify_ratio,
                      config.verify_min_matches);
      record.post_verification = vr.accepted ? 1 : 0;
    }

    if (hooks.tally_sink) {
      hooks.tally_sink(id, tally);
    }
    if (hooks.score_sink) {
      hooks.score_sink(id, scores);
    }
    report.records.push_back(std::move(record));
  }

  mean_std(query_times, &report.query_avg_ms, &report.query_std_ms);
  mean_std(add_times, &report.add_avg_ms, &report.add_std_ms);
  report.total_ms = ms_since(run_start);
  report.effective_config_json = config_json(config);
  return report;
}

std::vector<RawDescriptor> training_descriptors(const Dataset& dataset,
                                                std::size_t train_size) {
  std::vector<RawDescriptor> training;
  for (const DatasetVertex& v : dataset.vertices) {
    for (const RawDescriptor& d : v.descriptors) {
      if (training.size() >= train_size) {
        return training;
      }
      training.push_back(d);
    }
  }
  return training;
}

CalibratedModel fit_run_model(const Dataset& dataset, int target_dim,
                              const DetectorConfig& config,
                              std::size_t train_size) {
  const auto training = training_descriptors(dataset, train_size);
  if (training.size() < static_cast<std::size_t>(config.index.codebook_size)) {
    throw DataError("not enough training descriptors (" +
                    std::to_string(training.size()) + ") for codebook size " +
                    std::to_string(config.index.codebook_size));
  }
  CalibratedModel model;
  model.projection = fit_projection(training, target_dim);
  std::vector<Eigen::VectorXd> projected;
  projected.reserve(training.size());
  for (const RawDescriptor& d : training) {
    projected.push_back(model.projection.project(d));
  }
  const InvertedMultiIndex index =
      InvertedMultiIndex::train(projected, config.index);
  model.codebooks = IndexCodebooks{index.codebook_first(), index.codebook_second()};
  return model;
}

namespace {

// Nearest-counterpart squared distances of the calibration sample.
std::vector<double> self_match_distances(const Dataset& dataset,
                                         const ProjectionModel& projection,
                                         std::size_t sample_cap) {
  struct Entry {
    Eigen::VectorXd values;
    LandmarkId landmark;
  };
  std::vector<Entry> entries;
  for (const DatasetVertex& v : dataset.vertices) {
    for (std::size_t i = 0; i < v.descriptors.size(); ++i) {
      entries.push_back({projection.project(v.descriptors[i]),
                         i < v.landmark_links.size() ? v.landmark_links[i]
                                                     : kNoLandmark});
    }
  }

  std::vector<double> distances;
  if (entries.size() < 2) {
    return distances;
  }

  // Same-landmark pairs are true correspondences; prefer them when present.
  std::map<LandmarkId, std::vector<std::size_t>> by_landmark;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].landmark != kNoLandmark) {
      by_landmark[entries[i].landmark].push_back(i);
    }
  }
  bool any_pairs = false;
  for (const auto& [lm, members] : by_landmark) {
    (void)lm;
    if (members.size() >= 2) {
      any_pairs = true;
      break;
    }
  }
  if (any_pairs) {
    for (const auto& [lm, members] : by_landmark) {
      (void)lm;
      if (members.size() < 2) {
        continue;
      }
      for (const std::size_t i : members) {
        double best = std::numeric_limits<double>::infinity();
        for (const std::size_t j : members) {
          if (j == i) {
            continue;
          }
          best = std::min(best,
                          (entries[i].values - entries[j].values).squaredNorm());
        }
        distances.push_back(best);
      }
    }
    return distances;
  }

  // No landmark structure: nearest other descriptor, over a bounded sample.
  const std::size_t n = std::min(entries.size(), sample_cap);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < entries.size(); ++j) {
      if (j == i) {
        continue;
      }
      best = std::min(best, (entries[i].values - entries[j].values).squaredNorm());
    }
    distances.push_back(best);
  }
  return distances;
}

}  // namespace

CalibratedModel calibrate(const Dataset& dataset, int target_dim,
                          const DetectorConfig& config, std::size_t train_size,
                          double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("calibrate: percentile must lie in (0, 100]");
  }
  CalibratedModel model = fit_run_model(dataset, target_dim, config, train_size);
  std::vector<double> distances =
      self_match_distances(dataset, model.projection, 2000);
  if (distances.empty()) {
    throw DataError("calibrate: not enough descriptors for self-match distances");
  }
  std::sort(distances.begin(), distances.end());
  // Nearest-rank percentile; 100 maps to the maximum.
  const auto rank = static_cast<std::size_t>(
      std::ceil(percentile / 100.0 * static_cast<double>(distances.size())));
  model.theta = distances[std::max<std::size_t>(rank, 1) - 1];
  return model;
}

void write_detections_csv(const std::filesystem::path& path,
                          const std::vector<DetectionRecord>& records) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << "query_id,matched_id,neg_log_score,accepted,post_verification\n";
  char buffer[160];
  for (const DetectionRecord& r : records) {
    if (!r.has_candidate) {
      continue;
    }
    std::snprintf(buffer, sizeof(buffer), "%lld,%lld,%.17g,%d,%d\n",
                  static_cast<long long>(r.query), static_cast<long long>(r.matched),
                  r.neg_log10_pmf, r.accepted ? 1 : 0, r.post_verification);
    out << buffer;
  }
}

void write_baseline_csv(const std::filesystem::path& path,
                        const std::vector<DetectionRecord>& records) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << "query_id,matched_id,neg_log_score,accepted,post_verification\n";
  char buffer[160];
  for (const DetectionRecord& r : records) {
    if (!r.has_baseline) {
      continue;
    }
    std::snprintf(buffer, sizeof(buffer), "%lld,%lld,%.17g,%d,%d\n",
                  static_cast<long long>(r.query),
                  static_cast<long long>(r.baseline_matched),
                  static_cast<double>(r.baseline_votes), 1, -1);
    out << buffer;
  }
}

std::vector<DetectionRow> read_detections_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::vector<DetectionRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (line_no == 1 && line.rfind("query_id", 0) == 0) {
      continue;
    }
    DetectionRow row;
    long long query = 0;
    long long matched = 0;
    int accepted = 0;
    if (std::sscanf(line.c_str(), "%lld,%lld,%lf,%d,%d", &query, &matched,
                    &row.neg_log_score, &accepted, &row.post_verification) != 5) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": malformed detection row");
    }
    row.query = query;
    row.matched = matched;
    row.accepted = accepted != 0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<Detection> to_detections(const std::vector<DetectionRow>& rows) {
  std::vector<Detection> out;
  out.reserve(rows.size());
  for (const DetectionRow& row : rows) {
    out.push_back({row.query, row.matched, row.neg_log_score});
  }
  return out;
}

std::string config_json(const DetectorConfig& config) {
  nlohmann::json j;
  j["mode"] = config.mode == DetectorMode::kVertexToMap ? "v2m" : "v2v";
  j["alpha"] = config.alpha;
  j["alpha_map"] = config.effective_alpha_map();
  j["t_delay"] = config.t_delay;
  j["dt"] = config.dt;
  j["theta"] = config.index.max_distance;
  j["codebook_size"] = config.index.codebook_size;
  j["probe_cells"] = config.index.probe_cells;
  j["kmeans_iterations"] = config.index.kmeans_iterations;
  j["seed"] = config.index.seed;
  if (config.fixed_k) {
    j["fixed_k"] = *config.fixed_k;
  }
  j["approx_v2v"] = {{"min_total_votes", config.approx_v2v.min_total_votes},
                     {"max_lambda", config.approx_v2v.max_lambda}};
  j["approx_v2m"] = {{"min_total_votes", config.approx_v2m.min_total_votes},
                     {"max_lambda", config.approx_v2m.max_lambda}};
  j["verify"] = config.verify;
  j["verify_ratio"] = config.verify_ratio;
  j["verify_min_matches"] = config.verify_min_matches;
  return j.dump();
}

std::string run_report_json(const RunReport& report) {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(report.effective_config_json);
  j["queries"] = report.records.size();
  std::size_t accepted = 0;
  for (const DetectionRecord& r : report.records) {
    accepted += r.accepted ? 1 : 0;
  }
  j["accepted"] = accepted;
  j["timing_ms"] = {{"query_avg", report.query_avg_ms},
                    {"query_std", report.query_std_ms},
                    {"add_avg", report.add_avg_ms},
                    {"add_std", report.add_std_ms},
                    {"total", report.total_ms}};
  j["firewall_checks"] = report.firewall_checks;
  return j.dump(2);
}

}  // namespace loopdet
