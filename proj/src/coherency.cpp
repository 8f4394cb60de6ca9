#include "islanding/coherency.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include <json.hpp>

#include "islanding/error.hpp"
#include "text_io.hpp"

namespace islanding::coh {

SyncCoefficientMatrix sync_coefficients(const grid::ReducedNetwork& red, const std::vector<double>& emf,
                                        const std::vector<double>& delta, double time) {
  const auto m = static_cast<Eigen::Index>(red.order());
  if (static_cast<Eigen::Index>(emf.size()) != m || static_cast<Eigen::Index>(delta.size()) != m) {
    throw InputError("sync_coefficients: dimension mismatch");
  }
  RealMatrix k = RealMatrix::Zero(m, m);
  for (Eigen::Index p = 0; p < m; ++p) {
    for (Eigen::Index q = 0; q < m; ++q) {
      if (p == q) continue;
      const double d = delta[p] - delta[q];
      const Complex y = red.y_red(p, q);
      k(p, q) = emf[p] * emf[q] * (y.imag() * std::cos(d) - y.real() * std::sin(d));
    }
  }
  SyncCoefficientMatrix out;
  out.machine_ids = red.machine_ids;
  out.k = 0.5 * (k + k.transpose());
  out.k.diagonal().setZero();
  out.time = time;
  return out;
}

double baseline_scale(const SyncCoefficientMatrix& ks) { return ks.k.cwiseAbs().maxCoeff(); }

RealMatrix normalize_coherency(const SyncCoefficientMatrix& ks, double ref_scale) {
  if (!(ref_scale > 0.0)) throw InputError("normalize_coherency: ref_scale must be positive");
  RealMatrix c = (0.5 * (1.0 + ks.k.array() / ref_scale)).cwiseMax(0.0).cwiseMin(1.0).matrix();
  c.diagonal().setOnes();
  return c;
}

namespace {

void check_square(const RealMatrix& w) {
  if (w.rows() != w.cols()) throw InputError("weight matrix must be square");
}

std::vector<int> canonical(const std::vector<int>& labels) {
  std::vector<int> map(labels.size() + 1, -1);
  std::vector<int> out(labels.size());
  int next = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& slot = map[static_cast<std::size_t>(labels[i])];
    if (slot < 0) slot = next++;
    out[i] = slot;
  }
  return out;
}

double total_weight2(const RealMatrix& w) {
  double two_w = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (i != j) two_w += w(i, j);
    }
  }
  return two_w;
}

std::vector<int> exact_partition(const RealMatrix& w, double two_w) {
  const auto m = static_cast<int>(w.rows());
  const std::uint32_t full = (1u << m) - 1;
  std::vector<double> strength(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j) strength[i] += w(i, j);
    }
  }
  // f(S): modularity contribution of S as one community.
  std::vector<double> inner(full + 1, 0.0), str(full + 1, 0.0), f(full + 1, 0.0);
  for (std::uint32_t s = 1; s <= full; ++s) {
    const int i = std::countr_zero(s);
    const std::uint32_t rest = s & (s - 1);
    double link = 0.0;
    for (std::uint32_t r = rest; r; r &= r - 1) link += w(i, std::countr_zero(r));
    inner[s] = inner[rest] + 2.0 * link;
    str[s] = str[rest] + strength[i];
    const double a = str[s] / two_w;
    f[s] = inner[s] / two_w - a * a;
  }
  std::vector<double> best(full + 1, 0.0);
  std::vector<std::uint32_t> pick(full + 1, 0);
  for (std::uint32_t s = 1; s <= full; ++s) {
    const std::uint32_t low = s & (~s + 1);
    const std::uint32_t rest = s ^ low;
    double top = -std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    // Enumerate subsets t of rest, largest first, so ties favour bigger communities.
    for (std::uint32_t t = rest;; t = (t - 1) & rest) {
      const double v = f[t | low] + best[rest ^ t];
      if (v > top) {
        top = v;
        arg = t | low;
      }
      if (t == 0) break;
    }
    best[s] = top;
    pick[s] = arg;
  }
  std::vector<int> labels(static_cast<std::size_t>(m), 0);
  int next = 0;
  for (std::uint32_t s = full; s; s ^= pick[s]) {
    for (std::uint32_t r = pick[s]; r; r &= r - 1) labels[std::countr_zero(r)] = next;
    ++next;
  }
  return canonical(labels);
}

}  // namespace

double modularity(const RealMatrix& w, const std::vector<int>& labels) {
  check_square(w);
  if (labels.size() != static_cast<std::size_t>(w.rows())) throw InputError("modularity: label count mismatch");
  const double two_w = total_weight2(w);
  if (!(two_w > 0.0)) throw InputError("modularity: graph has no edge weight");
  const auto n = w.rows();
  std::vector<double> s(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j) s[i] += w(i, j);
    }
  }
  double q = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (labels[i] != labels[j]) continue;
      const double wij = i == j ? 0.0 : w(i, j);
      q += wij - s[i] * s[j] / two_w;
    }
  }
  return q / two_w;
}

std::vector<int> cluster_greedy(const RealMatrix& w) {
  check_square(w);
  const auto n = static_cast<std::size_t>(w.rows());
  const double two_w = total_weight2(w);
  if (!(two_w > 0.0)) throw InputError("clustering needs a graph with positive total weight");

  // Agglomeration over community-level sums; community ids are the lowest member.
  std::vector<int> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = static_cast<int>(i);
  RealMatrix e = RealMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> a(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      e(i, j) = w(i, j) / two_w;
      a[i] += w(i, j) / two_w;
    }
  }
  std::vector<bool> alive(n, true);
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) q -= a[i] * a[i];
  std::vector<int> best_label = label;
  double best_q = q;

  for (std::size_t merges = 1; merges < n; ++merges) {
    double top = -std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t x = 0; x < n; ++x) {
      if (!alive[x]) continue;
      for (std::size_t y = x + 1; y < n; ++y) {
        if (!alive[y]) continue;
        const double dq = 2.0 * (e(x, y) - a[x] * a[y]);
        if (dq > top + 1e-15) {
          top = dq;
          ba = x;
          bb = y;
        }
      }
    }
    for (std::size_t z = 0; z < n; ++z) {
      if (!alive[z] || z == ba || z == bb) continue;
      e(ba, z) += e(bb, z);
      e(z, ba) = e(ba, z);
    }
    e(ba, ba) += e(bb, bb) + 2.0 * e(ba, bb);
    a[ba] += a[bb];
    alive[bb] = false;
    for (auto& l : label) {
      if (l == static_cast<int>(bb)) l = static_cast<int>(ba);
    }
    q += top;
    if (q >= best_q - 1e-12) {
      best_q = std::max(q, best_q);
      best_label = label;
    }
  }

  // Single-vertex moves until no move improves Q.
  auto labels = canonical(best_label);
  double cur = modularity(w, labels);
  for (bool improved = true; improved;) {
    improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int groups = *std::max_element(labels.begin(), labels.end()) + 1;
      const int home = labels[i];
      int target = home;
      double target_q = cur;
      for (int g = 0; g < groups; ++g) {
        if (g == home) continue;
        labels[i] = g;
        const double qq = modularity(w, labels);
        if (qq > target_q + 1e-12) {
          target_q = qq;
          target = g;
        }
      }
      labels[i] = target;
      if (target != home) {
        labels = canonical(labels);
        cur = target_q;
        improved = true;
      }
    }
  }
  return labels;
}

std::vector<int> cluster_modularity(const RealMatrix& w, const ClusterOptions& opt) {
  auto labels = cluster_greedy(w);
  const auto n = static_cast<std::size_t>(w.rows());
  if (n >= 2 && n <= opt.exact_limit && n <= 24) {
    auto exact = exact_partition(w, total_weight2(w));
    if (modularity(w, exact) > modularity(w, labels) + 1e-12) labels = std::move(exact);
  }
  return labels;
}

GeneratorPartition cluster_coherent_groups(const SyncCoefficientMatrix& ks_base, const ClusterOptions& opt) {
  const RealMatrix w = ks_base.k.cwiseMax(0.0);
  if (w.size() == 0 || w.maxCoeff() <= 0.0) {
    throw InputError("coherency clustering: all synchronizing weights are zero");
  }
  const auto labels = cluster_modularity(w, opt);
  GeneratorPartition p;
  p.groups.resize(static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) p.groups[labels[i]].push_back(ks_base.machine_ids[i]);
  return p;
}

KsGM build_ksgm(const RealMatrix& c, const std::vector<std::string>& ids, const GeneratorPartition& partition) {
  const auto part = partition.restricted_to(ids);
  const auto group = part.assignment(ids);
  const std::size_t u = part.u();
  const auto m = ids.size();
  if (static_cast<std::size_t>(c.rows()) != m || static_cast<std::size_t>(c.cols()) != m) {
    throw InputError("build_ksgm: matrix does not match the machine list");
  }
  RealMatrix sum = RealMatrix::Zero(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u));
  RealMatrix cnt = RealMatrix::Zero(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u));
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = p + 1; q < m; ++q) {
      const auto gp = group[p], gq = group[q];
      const double v = gp == gq ? c(p, q) : 1.0 - c(p, q);
      sum(gp, gq) += v;
      cnt(gp, gq) += 1.0;
      if (gp != gq) {
        sum(gq, gp) += v;
        cnt(gq, gp) += 1.0;
      }
    }
  }
  KsGM out;
  out.u = u;
  out.a = RealMatrix::Zero(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u));
  out.singleton.assign(u, false);
  for (std::size_t i = 0; i < u; ++i) {
    for (std::size_t j = 0; j < u; ++j) {
      if (i == j && cnt(i, i) == 0.0) {
        out.a(i, i) = 1.0;
        out.singleton[i] = true;
      } else {
        out.a(i, j) = sum(i, j) / cnt(i, j);
      }
    }
  }
  return out;
}

PartitionOverride parse_partition_override(std::string_view json_text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InputError(std::string("partition file: ") + e.what());
  }
  PartitionOverride out;
  try {
    if (!j.contains("groups")) throw InputError("partition file: missing 'groups'");
    out.partition.groups = j.at("groups").get<std::vector<std::vector<std::string>>>();
    if (j.contains("bus_regions")) out.bus_regions = j.at("bus_regions").get<std::vector<std::vector<int>>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("partition file: ") + e.what());
  }
  if (out.partition.groups.empty()) throw InputError("partition file: no groups");
  if (out.bus_regions && out.bus_regions->size() != out.partition.u()) {
    throw InputError("partition file: bus_regions must list one region per group");
  }
  return out;
}

PartitionOverride load_partition_override(const std::string& path) {
  return parse_partition_override(detail::read_text_file(path, "partition file"));
}

std::string partition_override_to_json(const PartitionOverride& p) {
  nlohmann::json j;
  j["groups"] = p.partition.groups;
  if (p.bus_regions) j["bus_regions"] = *p.bus_regions;
  return j.dump(2) + "\n";
}

}  // namespace islanding::coh
