#include "loopdet/dataset_io.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <json.hpp>

#include "binary_io.h"

namespace loopdet {

namespace {

using nlohmann::json;

constexpr char kDescriptorMagic[4] = {'V', 'P', 'R', 'D'};
constexpr std::uint32_t kDescriptorVersion = 1;

std::string location(const std::filesystem::path& file, std::size_t line) {
  return file.string() + ":" + std::to_string(line);
}

json parse_line(const std::filesystem::path& file, std::size_t line,
                const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(location(file, line) + ": invalid JSON (" + e.what() + ")");
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& directory) {
  Dataset dataset;

  // vertices.jsonl
  const auto vertices_path = directory / "vertices.jsonl";
  {
    std::ifstream in(vertices_path);
    if (!in) {
      throw DataError("cannot open " + vertices_path.string());
    }
    std::string text;
    std::size_t line = 0;
    double last_t = -std::numeric_limits<double>::infinity();
    while (std::getline(in, text)) {
      ++line;
      if (text.empty()) {
        continue;
      }
      const json record = parse_line(vertices_path, line, text);
      DatasetVertex v;
      try {
        v.id = record.at("id").get<VertexId>();
        v.timestamp = record.at("t").get<double>();
        if (record.contains("position")) {
          const auto& pos = record.at("position");
          if (!pos.is_array() || pos.size() != 3) {
            throw DataError(location(vertices_path, line) +
                            ": position must be [x, y, z]");
          }
          v.position = Eigen::Vector3d(pos[0].get<double>(), pos[1].get<double>(),
                                       pos[2].get<double>());
        }
      } catch (const json::exception& e) {
        throw DataError(location(vertices_path, line) + ": " + e.what());
      }
      if (v.id != static_cast<VertexId>(dataset.vertices.size())) {
        throw DataError(location(vertices_path, line) +
                        ": vertex ids must be dense and in order (expected " +
                        std::to_string(dataset.vertices.size()) + ", got " +
                        std::to_string(v.id) + ")");
      }
      if (v.timestamp < last_t) {
        throw DataError(location(vertices_path, line) +
                        ": vertices must be sorted by timestamp");
      }
      last_t = v.timestamp;
      dataset.vertices.push_back(std::move(v));
    }
  }

  // landmarks.jsonl (may be empty)
  const auto landmarks_path = directory / "landmarks.jsonl";
  std::map<LandmarkId, std::vector<VertexId>> declared_observers;
  {
    std::ifstream in(landmarks_path);
    if (!in) {
      throw DataError("cannot open " + landmarks_path.string());
    }
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (text.empty()) {
        continue;
      }
      const json record = parse_line(landmarks_path, line, text);
      try {
        const auto id = record.at("id").get<LandmarkId>();
        if (id == kNoLandmark) {
          throw DataError(location(landmarks_path, line) +
                          ": landmark id -1 is reserved");
        }
        if (!declared_observers.emplace(id, record.at("observers").get<std::vector<VertexId>>()).second) {
          throw DataError(location(landmarks_path, line) +
                          ": duplicate landmark id " + std::to_string(id));
        }
      } catch (const json::exception& e) {
        throw DataError(location(landmarks_path, line) + ": " + e.what());
      }
    }
  }

  // descriptors.bin
  const auto descriptors_path = directory / "descriptors.bin";
  {
    std::ifstream in(descriptors_path, std::ios::binary);
    if (!in) {
      throw DataError("cannot open " + descriptors_path.string());
    }
    char magic[4];
    io::read_bytes(in, magic, 4, "descriptor magic");
    if (std::memcmp(magic, kDescriptorMagic, 4) != 0) {
      throw DataError(descriptors_path.string() + ": bad magic");
    }
    const std::uint32_t version = io::read_u32(in, "descriptor version");
    if (version != kDescriptorVersion) {
      throw DataError(descriptors_path.string() + ": unsupported version " +
                      std::to_string(version));
    }
    dataset.d_raw = static_cast<int>(io::read_u32(in, "descriptor dimension"));
    if (dataset.d_raw <= 0 || dataset.d_raw % 8 != 0) {
      throw DataError(descriptors_path.string() +
                      ": descriptor dimension must be a positive multiple of 8");
    }
    const std::size_t bytes_per_descriptor = static_cast<std::size_t>(dataset.d_raw) / 8;

    while (in.peek() != EOF) {
      const auto vertex_id = static_cast<VertexId>(io::read_u64(in, "block vertex id"));
      if (vertex_id < 0 || vertex_id >= static_cast<VertexId>(dataset.vertices.size())) {
        throw DataError(descriptors_path.string() + ": block references vertex " +
                        std::to_string(vertex_id) + " not present in vertices.jsonl");
      }
      DatasetVertex& v = dataset.vertices[static_cast<std::size_t>(vertex_id)];
      if (!v.descriptors.empty()) {
        throw DataError(descriptors_path.string() + ": duplicate block for vertex " +
                        std::to_string(vertex_id));
      }
      const std::uint32_t count = io::read_u32(in, "block count");
      v.descriptors.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        std::vector<std::uint8_t> bytes(bytes_per_descriptor);
        io::read_bytes(in, bytes.data(), bytes.size(), "descriptor bytes");
        v.descriptors.emplace_back(std::move(bytes), dataset.d_raw);
      }
      v.landmark_links.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        const LandmarkId lm = io::read_i64(in, "landmark id");
        if (lm != kNoLandmark && declared_observers.count(lm) == 0) {
          throw DataError(descriptors_path.string() + ": vertex " +
                          std::to_string(vertex_id) + " links undeclared landmark " +
                          std::to_string(lm));
        }
        v.landmark_links.push_back(lm);
      }
    }
  }
  for (DatasetVertex& v : dataset.vertices) {
    if (v.landmark_links.empty()) {
      v.landmark_links.assign(v.descriptors.size(), kNoLandmark);
    }
  }

  // Cross-check observer lists against the links.
  std::map<LandmarkId, std::vector<VertexId>> derived;
  for (const DatasetVertex& v : dataset.vertices) {
    std::set<LandmarkId> seen;
    for (const LandmarkId lm : v.landmark_links) {
      if (lm == kNoLandmark) {
        continue;
      }
      if (!seen.insert(lm).second) {
        throw DataError(descriptors_path.string() + ": vertex " +
                        std::to_string(v.id) + " links landmark " +
                        std::to_string(lm) + " more than once");
      }
      derived[lm].push_back(v.id);
    }
  }
  for (const auto& [id, observers] : declared_observers) {
    std::vector<VertexId> sorted = observers;
    std::sort(sorted.begin(), sorted.end());
    auto it = derived.find(id);
    const std::vector<VertexId> empty;
    const std::vector<VertexId>& from_links = it == derived.end() ? empty : it->second;
    if (sorted != from_links) {
      throw DataError(landmarks_path.string() + ": observers of landmark " +
                      std::to_string(id) +
                      " disagree with descriptor landmark links");
    }
    dataset.landmarks.emplace_back(id, from_links);
  }

  return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);

  {
    std::ofstream out(directory / "vertices.jsonl");
    if (!out) {
      throw DataError("cannot write " + (directory / "vertices.jsonl").string());
    }
    for (const DatasetVertex& v : dataset.vertices) {
      json record;
      record["id"] = v.id;
      record["t"] = v.timestamp;
      if (v.position) {
        record["position"] = {(*v.position)[0], (*v.position)[1], (*v.position)[2]};
      }
      out << record.dump() << '\n';
    }
  }

  {
    std::ofstream out(directory / "landmarks.jsonl");
    if (!out) {
      throw DataError("cannot write " + (directory / "landmarks.jsonl").string());
    }
    for (const auto& [id, observers] : dataset.landmarks) {
      json record;
      record["id"] = id;
      record["observers"] = observers;
      out << record.dump() << '\n';
    }
  }

  {
    std::ofstream out(directory / "descriptors.bin", std::ios::binary);
    if (!out) {
      throw DataError("cannot write " + (directory / "descriptors.bin").string());
    }
    io::write_bytes(out, kDescriptorMagic, 4);
    io::write_u32(out, kDescriptorVersion);
    io::write_u32(out, static_cast<std::uint32_t>(dataset.d_raw));
    for (const DatasetVertex& v : dataset.vertices) {
      io::write_u64(out, static_cast<std::uint64_t>(v.id));
      io::write_u32(out, static_cast<std::uint32_t>(v.descriptors.size()));
      for (const RawDescriptor& d : v.descriptors) {
        if (d.size() != dataset.d_raw) {
          throw DataError("save_dataset: descriptor dimension mismatch on vertex " +
                          std::to_string(v.id));
        }
        io::write_bytes(out, d.bytes().data(), d.bytes().size());
      }
      for (std::size_t i = 0; i < v.descriptors.size(); ++i) {
        const LandmarkId lm =
            i < v.landmark_links.size() ? v.landmark_links[i] : kNoLandmark;
        io::write_i64(out, lm);
      }
    }
  }
}

MapDatabase build_map_database(const Dataset& dataset) {
  MapDatabase db;
  for (const auto& [id, observers] : dataset.landmarks) {
    (void)observers;
    db.declare_landmark(id);
  }
  for (const DatasetVertex& v : dataset.vertices) {
    db.add_vertex(v.timestamp, v.position, v.descriptors, &v.landmark_links);
  }
  return db;
}

std::vector<GroundtruthEntry> groundtruth_from_dataset(const Dataset& dataset) {
  std::vector<GroundtruthEntry> out;
  out.reserve(dataset.vertices.size());
  for (const DatasetVertex& v : dataset.vertices) {
    if (!v.position) {
      throw DataError("vertex " + std::to_string(v.id) +
                      " has no groundtruth position");
    }
    out.push_back({v.id, v.timestamp, *v.position});
  }
  return out;
}

}  // namespace loopdet
