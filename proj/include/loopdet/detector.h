#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "loopdet/config.h"
#include "loopdet/dataset_io.h"
#include "loopdet/map_database.h"
#include "loopdet/model_io.h"
#include "loopdet/scoring.h"
#include "loopdet/voting.h"

namespace loopdet {

// One replay step's outcome. A record always reports the best-scoring
// candidate when one exists; `accepted` marks whether it passed alpha.
struct DetectionRecord {
  VertexId query = -1;
  std::uint64_t total_votes = 0;
  std::uint64_t database_descriptors = 0;

  bool has_candidate = false;
  VertexId matched = -1;
  double pmf = 1.0;
  double neg_log10_pmf = 0.0;
  bool accepted = false;
  int post_verification = -1;  // -1 not run, else 0/1
  std::vector<LandmarkId> landmarks;  // vertex-to-map payload when accepted

  // Raw-vote-count baseline over the same tally: the vertex with the most
  // votes, ties toward the lower id.
  bool has_baseline = false;
  VertexId baseline_matched = -1;
  std::uint64_t baseline_votes = 0;
};

struct RunReport {
  std::vector<DetectionRecord> records;
  double query_avg_ms = 0.0;
  double query_std_ms = 0.0;
  double add_avg_ms = 0.0;
  double add_std_ms = 0.0;
  double total_ms = 0.0;
  std::uint64_t firewall_checks = 0;
  std::string effective_config_json;
};

// Optional per-step observers, used by diagnostics and tests.
struct RunHooks {
  std::function<void(VertexId, const VoteTally&)> tally_sink;
  std::function<void(VertexId, const ScoreMap&)> score_sink;
};

// Replays the dataset in timestamp order. Per step: admit due vertices,
// aggregate votes for the current vertex, check the temporal firewall,
// score, optionally verify, record. The model must carry trained codebooks.
// Throws std::logic_error if a vote ever lands on a vertex younger than the
// admission horizon.
RunReport run_detector(const Dataset& dataset, const CalibratedModel& model,
                       const DetectorConfig& config, const RunHooks& hooks = {});

// Training-set policy for runs without a calibrated model file: the first
// `train_size` descriptors observed in the dataset.
std::vector<RawDescriptor> training_descriptors(const Dataset& dataset,
                                                std::size_t train_size);

// Fits the projection on the dataset's leading descriptors and trains the
// index codebooks on their projections.
CalibratedModel fit_run_model(const Dataset& dataset, int target_dim,
                              const DetectorConfig& config,
                              std::size_t train_size);

// Calibration: fit_run_model plus a maximum-distance threshold set at the
// given percentile of self-match squared distances. Self-matches pair each
// sampled descriptor with its nearest counterpart: descriptors of the same
// landmark when landmarks exist, otherwise the nearest other descriptor.
CalibratedModel calibrate(const Dataset& dataset, int target_dim,
                          const DetectorConfig& config, std::size_t train_size,
                          double percentile);

// detections.csv: query_id,matched_id,neg_log_score,accepted,post_verification
struct DetectionRow {
  VertexId query = -1;
  VertexId matched = -1;
  double neg_log_score = 0.0;
  bool accepted = false;
  int post_verification = -1;
};

void write_detections_csv(const std::filesystem::path& path,
                          const std::vector<DetectionRecord>& records);
// Same schema, scores are the baseline vote counts.
void write_baseline_csv(const std::filesystem::path& path,
                        const std::vector<DetectionRecord>& records);
std::vector<DetectionRow> read_detections_csv(const std::filesystem::path& path);

std::vector<Detection> to_detections(const std::vector<DetectionRow>& rows);

std::string run_report_json(const RunReport& report);
std::string config_json(const DetectorConfig& config);

}  // namespace loopdet
