#pragma once

#include <vector>

#include "loopdet/config.h"
#include "loopdet/map_database.h"
#include "loopdet/multi_index.h"
#include "loopdet/projection.h"
#include "loopdet/types.h"

namespace loopdet {

// Projects a vertex's raw descriptors (once; cached on the vertex) and
// returns them tagged with owner and landmark ids.
std::vector<ProjectedDescriptor> project_vertex_descriptors(
    MapDatabase& db, const ProjectionModel& model, VertexId id);

// Admits every not-yet-admitted vertex with timestamp <= t_query - t_delay:
// its descriptors are projected and inserted into the index. Vertex-to-map
// mode retains only descriptors carrying a landmark link; vertex-to-vertex
// retains all of them. Updates gamma_i, Gamma and n_database. Returns the
// number of vertices admitted. Must be called with nondecreasing t_query.
std::size_t admit_due_vertices(MapDatabase& db, InvertedMultiIndex& index,
                               const ProjectionModel& model, double t_query,
                               const DetectorConfig& config);

// Vote aggregation for one query vertex: k nearest neighbors per query
// descriptor (k from the adaptive table unless config.fixed_k is set), one
// vote per neighbor to the neighbor's owner vertex.
VoteTally aggregate_v2v(const std::vector<ProjectedDescriptor>& query_descriptors,
                        const InvertedMultiIndex& index,
                        const DetectorConfig& config);

// Vertex-to-map aggregation: each neighbor votes for every vertex that both
// observes the matched landmark and lies within [t_match - dt, t_match + dt],
// where t_match is the timestamp of the neighbor's owner. Throws
// std::logic_error if an index entry carries no landmark id.
VoteTally aggregate_v2m(const std::vector<ProjectedDescriptor>& query_descriptors,
                        const InvertedMultiIndex& index, const MapDatabase& db,
                        const DetectorConfig& config);

// Temporal firewall: true iff no voted vertex is younger than
// t_query - t_delay. The detector asserts this every step.
bool firewall_clear(const VoteTally& tally, const MapDatabase& db,
                    double t_query, double t_delay);

}  // namespace loopdet
