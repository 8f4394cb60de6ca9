#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "islanding/grid.hpp"
#include "islanding/partition.hpp"

namespace islanding::coh {

/// Pairwise synchronizing coefficients (per-unit power per radian).
struct SyncCoefficientMatrix {
  std::vector<std::string> machine_ids;
  RealMatrix k;  // symmetric, zero diagonal
  double time = 0.0;
};

/// K_pq = E_p E_q (B_pq cos d_pq - G_pq sin d_pq), symmetrized, zero diagonal.
/// emf and delta are in reduced-network order.
SyncCoefficientMatrix sync_coefficients(const grid::ReducedNetwork& red, const std::vector<double>& emf,
                                        const std::vector<double>& delta, double time = 0.0);

/// Largest |k_pq|; the default normalization scale at the baseline tick.
double baseline_scale(const SyncCoefficientMatrix& ks);

/// c_pq = clamp((1 + k_pq / ref_scale) / 2, 0, 1). The diagonal is set to 1 and never read.
RealMatrix normalize_coherency(const SyncCoefficientMatrix& ks, double ref_scale);

/// Newman modularity of a labelling of a weighted undirected graph.
double modularity(const RealMatrix& w, const std::vector<int>& labels);

struct ClusterOptions {
  /// Graphs up to this size are also solved exactly over all set partitions.
  std::size_t exact_limit = 16;
};

/// Community labels (0..u-1, numbered by lowest member) at maximum modularity:
/// greedy agglomeration, then single-vertex moves, then (small graphs) an
/// exact search. Throws InputError for an all-zero weight matrix.
std::vector<int> cluster_modularity(const RealMatrix& w, const ClusterOptions& opt = {});

/// Greedy stage alone (agglomeration + vertex moves), exposed for tests and benchmarks.
std::vector<int> cluster_greedy(const RealMatrix& w);

/// Clusters the graph w_pq = max(0, k_pq) of the baseline coefficients.
GeneratorPartition cluster_coherent_groups(const SyncCoefficientMatrix& ks_base, const ClusterOptions& opt = {});

struct KsGM {
  std::size_t u = 0;
  RealMatrix a;                // diagonal: intra-group coherency; off-diagonal: inter-group incoherency
  std::vector<bool> singleton;
  bool baseline = false;
};

/// Block means of the normalized matrix `c` (ordered like `ids`) over the partition.
KsGM build_ksgm(const RealMatrix& c, const std::vector<std::string>& ids, const GeneratorPartition& partition);

/// Partition override file: explicit groups plus, optionally, the bus
/// membership of each group's region.
struct PartitionOverride {
  GeneratorPartition partition;
  std::optional<std::vector<std::vector<int>>> bus_regions;
};

PartitionOverride parse_partition_override(std::string_view json_text);
PartitionOverride load_partition_override(const std::string& path);
std::string partition_override_to_json(const PartitionOverride& p);

}  // namespace islanding::coh
