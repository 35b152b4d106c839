#include "aigrl/largecircuit.hpp"

#include <map>
#include <set>
#include <sstream>

namespace aigrl {

Aig induced_subcircuit(const Aig& aig, const std::vector<int32_t>& gates) {
  std::map<int, int> local;
  for (int g : gates) local.emplace(g, static_cast<int>(local.size()));
  Aig sub;
  for (int g : gates) {
    int f[2] = {-1, -1};
    int kept = 0;
    for (int s = 0; s < arity(aig.kind[g]); ++s) {
      auto it = local.find(aig.fanin[g][s]);
      if (it != local.end() && it->second < local.at(g)) f[kept++] = it->second;
    }
    // a gate whose fanins fall outside the window degrades to a local source
    GateKind k = aig.kind[g];
    if (kept == 0)
      k = GateKind::PI;
    else if (kept == 1 && k == GateKind::AND2)
      k = GateKind::NOT;
    sub.add_gate(k, f[0], kept > 1 ? f[1] : -1);
  }
  finalize(sub);
  return sub;
}

namespace {

// the l-hop cone membership, shortest fanin distance <= hops-1
std::vector<int> cone_gates(const Aig& aig, int root, int hops) {
  std::vector<int> members{root};
  std::set<int> seen{root};
  std::vector<int> frontier{root};
  for (int d = 0; d + 1 < hops && !frontier.empty(); ++d) {
    std::vector<int> next;
    for (int g : frontier)
      for (int s = 0; s < arity(aig.kind[g]); ++s) {
        const int f = aig.fanin[g][s];
        if (seen.insert(f).second) {
          next.push_back(f);
          members.push_back(f);
        }
      }
    frontier = std::move(next);
  }
  return members;
}

}  // namespace

AreaPartition partition_areas(const Aig& aig, int hops, int delta, int max_gates) {
  if (hops < 1) throw ArgumentError("hops must be >= 1");
  if (delta >= hops) throw ArgumentError("delta must be smaller than the hop count");
  if (delta < 1) throw ArgumentError("delta must be >= 1");
  if ((1 << hops) - 1 > max_gates)
    throw ArgumentError("a single cone can exceed max_gates at this hop count");
  const int n = aig.n();
  int max_level = 0;
  for (int g = 0; g < n; ++g) max_level = std::max(max_level, static_cast<int>(aig.level[g]));

  std::vector<int> band_levels;
  for (int lv = std::min(hops, max_level);; lv += delta) {
    if (lv >= max_level) {
      band_levels.push_back(max_level);
      break;
    }
    band_levels.push_back(lv);
  }

  std::vector<int> fanouts(n, 0);
  for (int g = 0; g < n; ++g)
    for (int s = 0; s < arity(aig.kind[g]); ++s) fanouts[aig.fanin[g][s]]++;

  const int n_bands = static_cast<int>(band_levels.size());
  std::vector<std::vector<int>> band_roots(n_bands);
  for (int g = 0; g < n; ++g) {
    const int lv = aig.level[g];
    for (int b = 0; b < n_bands; ++b) {
      const int prev = b == 0 ? -1 : band_levels[b - 1];
      if (lv == band_levels[b] || (fanouts[g] == 0 && prev < lv && lv < band_levels[b])) {
        band_roots[b].push_back(g);
        break;
      }
    }
  }

  std::vector<std::set<int>> band_members(n_bands);
  std::vector<std::vector<std::pair<int, std::vector<int>>>> band_cones(n_bands);
  std::vector<char> covered(n, 0);
  for (int b = 0; b < n_bands; ++b) {
    for (int root : band_roots[b]) {
      auto cone = cone_gates(aig, root, hops);
      for (int g : cone) {
        band_members[b].insert(g);
        covered[g] = 1;
      }
      band_cones[b].push_back({root, std::move(cone)});
    }
  }

  // supplement: any still-uncovered gate roots its own cone in the nearest
  // band at or above its level
  for (int g = 0; g < n; ++g) {
    if (covered[g]) continue;
    int b = n_bands - 1;
    for (int cand = 0; cand < n_bands; ++cand)
      if (band_levels[cand] >= aig.level[g]) {
        b = cand;
        break;
      }
    auto cone = cone_gates(aig, g, hops);
    for (int v : cone) {
      band_members[b].insert(v);
      covered[v] = 1;
    }
    band_cones[b].push_back({g, std::move(cone)});
  }

  AreaPartition part;
  part.hops = hops;
  part.delta = delta;
  part.max_gates = max_gates;
  for (int b = 0; b < n_bands; ++b) {
    if (band_members[b].empty()) continue;
    if (static_cast<int>(band_members[b].size()) <= max_gates) {
      part.areas.emplace_back(band_members[b].begin(), band_members[b].end());
      part.band_of_area.push_back(b);
      continue;
    }
    // greedy sub-split by whole cones in ascending root order
    std::sort(band_cones[b].begin(), band_cones[b].end());
    std::set<int> current;
    auto flush = [&]() {
      if (current.empty()) return;
      part.areas.emplace_back(current.begin(), current.end());
      part.band_of_area.push_back(b);
      current.clear();
    };
    for (const auto& [root, cone] : band_cones[b]) {
      std::set<int> merged = current;
      merged.insert(cone.begin(), cone.end());
      if (static_cast<int>(merged.size()) > max_gates) {
        flush();
        current.insert(cone.begin(), cone.end());
      } else {
        current = std::move(merged);
      }
    }
    flush();
  }
  return part;
}

void validate_partition(const Aig& aig, const AreaPartition& part) {
  const int n = aig.n();
  std::vector<char> covered(n, 0);
  for (size_t a = 0; a < part.areas.size(); ++a) {
    const auto& area = part.areas[a];
    if (area.empty()) throw ArgumentError("partition contains an empty area");
    if (static_cast<int>(area.size()) > part.max_gates)
      throw ArgumentError("area " + std::to_string(a) + " exceeds max_gates");
    if (!std::is_sorted(area.begin(), area.end()))
      throw ArgumentError("area gate lists must be sorted");
    for (int g : area) {
      if (g < 0 || g >= n) throw ArgumentError("area gate out of range");
      covered[g] = 1;
    }
  }
  for (int g = 0; g < n; ++g)
    if (!covered[g]) throw ArgumentError("gate " + std::to_string(g) + " is uncovered");
  if (!std::is_sorted(part.band_of_area.begin(), part.band_of_area.end()))
    throw ArgumentError("areas must be ordered by ascending band");
  // consecutive bands share at least one gate when delta < hops
  if (part.delta < part.hops) {
    std::map<int, std::set<int>> by_band;
    for (size_t a = 0; a < part.areas.size(); ++a)
      by_band[part.band_of_area[a]].insert(part.areas[a].begin(), part.areas[a].end());
    const auto bands = [&] {
      std::vector<int> b;
      for (const auto& [band, gates] : by_band) b.push_back(band);
      return b;
    }();
    for (size_t i = 1; i < bands.size(); ++i) {
      const auto& prev = by_band[bands[i - 1]];
      const auto& curr = by_band[bands[i]];
      bool shares = false;
      for (int g : curr)
        if (prev.count(g)) {
          shares = true;
          break;
        }
      if (!shares)
        throw ArgumentError("bands " + std::to_string(bands[i - 1]) + " and " +
                            std::to_string(bands[i]) + " do not overlap");
    }
  }
}

std::string format_pair_export(const std::vector<ScoredPair>& pairs, double theta, uint64_t seed,
                               const std::string& checkpoint_hash) {
  std::ostringstream out;
  out << "# theta=" << theta << " seed=" << seed << " checkpoint=" << checkpoint_hash << "\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& p : pairs) out << p.i << ' ' << p.j << ' ' << p.score << '\n';
  return out.str();
}

}  // namespace aigrl
