#include "udparse/decode.h"

#include <limits>

#include "udparse/error.h"

namespace udparse {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Matrix = std::vector<std::vector<double>>;

// Returns the nodes of one cycle in `heads` (node 0 is the root and has no
// head), or an empty vector. Scans start nodes in increasing order.
std::vector<int> FindCycle(const std::vector<int>& heads) {
  const int m = static_cast<int>(heads.size());
  std::vector<int> state(m, 0);  // 0 unvisited, 1 on current path, 2 done
  for (int start = 1; start < m; ++start) {
    if (state[start]) continue;
    std::vector<int> path;
    int cur = start;
    while (cur > 0 && state[cur] == 0) {
      state[cur] = 1;
      path.push_back(cur);
      cur = heads[cur];
    }
    if (cur > 0 && state[cur] == 1) {
      std::vector<int> cycle;
      int node = cur;
      do {
        cycle.push_back(node);
        node = heads[node];
      } while (node != cur);
      return cycle;
    }
    for (int p : path) state[p] = 2;
  }
  return {};
}

// Chu-Liu-Edmonds on a dense matrix; node 0 is the root. Returns heads with
// heads[0] = -1.
std::vector<int> Arborescence(const Matrix& s) {
  const int m = static_cast<int>(s.size());
  std::vector<int> best(m, -1);
  for (int d = 1; d < m; ++d) {
    double best_score = kNegInf;
    for (int h = 0; h < m; ++h) {
      if (h == d) continue;
      if (best[d] < 0 || s[h][d] > best_score) {
        best_score = s[h][d];
        best[d] = h;
      }
    }
  }
  const std::vector<int> cycle = FindCycle(best);
  if (cycle.empty()) return best;

  std::vector<bool> in_cycle(m, false);
  for (int c : cycle) in_cycle[c] = true;
  // New indices: non-cycle nodes in order, then the contracted node.
  std::vector<int> new_index(m, -1);
  std::vector<int> old_of;
  for (int v = 0; v < m; ++v) {
    if (!in_cycle[v]) {
      new_index[v] = static_cast<int>(old_of.size());
      old_of.push_back(v);
    }
  }
  const int c = static_cast<int>(old_of.size());
  const int m2 = c + 1;
  Matrix s2(m2, std::vector<double>(m2, kNegInf));
  std::vector<int> enter_at(m2, -1);   // for u -> c: which cycle node is entered
  std::vector<int> leave_from(m2, -1); // for c -> v: which cycle node is the head
  for (int u = 0; u < m; ++u) {
    if (in_cycle[u]) continue;
    for (int v = 0; v < m; ++v) {
      if (in_cycle[v] || u == v) continue;
      s2[new_index[u]][new_index[v]] = s[u][v];
    }
    double best_in = kNegInf;
    for (int v : cycle) {
      const double adj = s[u][v] - s[best[v]][v];
      if (enter_at[new_index[u]] < 0 || adj > best_in) {
        best_in = adj;
        enter_at[new_index[u]] = v;
      }
    }
    s2[new_index[u]][c] = best_in;
  }
  for (int v = 1; v < m; ++v) {
    if (in_cycle[v]) continue;
    double best_out = kNegInf;
    for (int u : cycle) {
      if (leave_from[new_index[v]] < 0 || s[u][v] > best_out) {
        best_out = s[u][v];
        leave_from[new_index[v]] = u;
      }
    }
    s2[c][new_index[v]] = best_out;
  }
  const std::vector<int> sub = Arborescence(s2);
  std::vector<int> heads(m, -1);
  for (int c_node : cycle) heads[c_node] = best[c_node];
  for (int v2 = 1; v2 < m2; ++v2) {
    const int h2 = sub[v2];
    if (v2 == c) {
      const int u = old_of[h2];
      heads[enter_at[h2]] = u;
    } else {
      const int v = old_of[v2];
      heads[v] = h2 == c ? leave_from[v2] : old_of[h2];
    }
  }
  return heads;
}

Matrix ToMatrix(const Tensor& arc) {
  const size_t m = arc.rows();
  Matrix s(m, std::vector<double>(m, kNegInf));
  for (size_t h = 0; h < m; ++h)
    for (size_t d = 1; d < m; ++d)
      if (h != d) s[h][d] = arc.at(h, d);
  return s;
}

void CheckSquare(const Tensor& arc) {
  if (arc.rank() != 2 || arc.rows() != arc.cols() || arc.rows() < 2) {
    throw DimensionError("decode: arc scores must be (n+1) x (n+1) with n >= 1");
  }
}

}  // namespace

bool IsValidTree(const std::vector<int>& heads) {
  const int n = static_cast<int>(heads.size());
  if (n == 0) return false;
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    if (heads[i] < 0 || heads[i] > n || heads[i] == i + 1) return false;
    if (heads[i] == 0) ++roots;
  }
  if (roots != 1) return false;
  for (int i = 1; i <= n; ++i) {
    int cur = i;
    for (int steps = 0; cur != 0; ++steps) {
      if (steps > n) return false;
      cur = heads[cur - 1];
    }
  }
  return true;
}

double TreeScore(const Tensor& arc, const std::vector<int>& heads) {
  double s = 0.0;
  for (size_t i = 0; i < heads.size(); ++i) s += arc.at(heads[i], i + 1);
  return s;
}

std::vector<int> GreedyFixDecode(const Tensor& arc) {
  CheckSquare(arc);
  const int n = static_cast<int>(arc.rows()) - 1;
  // heads indexed by node (1..n); heads[0] unused.
  std::vector<int> heads(n + 1, -1);
  std::vector<int> best_nonroot(n + 1, -1);
  for (int d = 1; d <= n; ++d) {
    for (int h = 0; h <= n; ++h) {
      if (h == d) continue;
      if (heads[d] < 0 || arc.at(h, d) > arc.at(heads[d], d)) heads[d] = h;
      if (h > 0 && (best_nonroot[d] < 0 || arc.at(h, d) > arc.at(best_nonroot[d], d))) {
        best_nonroot[d] = h;
      }
    }
  }

  // Root repair.
  std::vector<int> roots;
  for (int d = 1; d <= n; ++d)
    if (heads[d] == 0) roots.push_back(d);
  if (roots.size() != 1 && n > 1) {
    std::vector<int> candidates = roots;
    if (candidates.empty())
      for (int d = 1; d <= n; ++d) candidates.push_back(d);
    int keep = -1;
    double keep_margin = 0.0;
    for (int d : candidates) {
      const double margin = arc.at(0, d) - arc.at(best_nonroot[d], d);
      if (keep < 0 || margin > keep_margin) {
        keep = d;
        keep_margin = margin;
      }
    }
    for (int d : roots)
      if (d != keep) heads[d] = best_nonroot[d];
    heads[keep] = 0;
  } else if (n == 1) {
    heads[1] = 0;
  }

  // Cycle repair.
  heads[0] = -1;
  for (std::vector<int> cycle = FindCycle(heads); !cycle.empty();
       cycle = FindCycle(heads)) {
    std::vector<bool> connected(n + 1, false);
    for (int d = 1; d <= n; ++d) {
      int cur = d;
      for (int steps = 0; cur > 0 && steps <= n; ++steps) cur = heads[cur];
      connected[d] = cur == 0;
    }
    int move_node = -1, move_head = -1;
    double move_loss = 0.0;
    for (int c = 1; c <= n; ++c) {
      bool member = false;
      for (int x : cycle) member |= x == c;
      if (!member) continue;
      int best_h = -1;
      for (int h = 1; h <= n; ++h) {
        if (!connected[h] || h == c) continue;
        if (best_h < 0 || arc.at(h, c) > arc.at(best_h, c)) best_h = h;
      }
      if (best_h < 0) continue;
      const double loss = arc.at(heads[c], c) - arc.at(best_h, c);
      if (move_node < 0 || loss < move_loss) {
        move_node = c;
        move_head = best_h;
        move_loss = loss;
      }
    }
    if (move_node < 0) throw Error("decode: cycle with no connected head");
    heads[move_node] = move_head;
  }
  return std::vector<int>(heads.begin() + 1, heads.end());
}

std::vector<int> CleDecode(const Tensor& arc) {
  CheckSquare(arc);
  const int n = static_cast<int>(arc.rows()) - 1;
  const Matrix s = ToMatrix(arc);
  std::vector<int> heads = Arborescence(s);
  int root_children = 0;
  for (int d = 1; d <= n; ++d) root_children += heads[d] == 0;
  if (root_children != 1) {
    double best_score = kNegInf;
    std::vector<int> best_heads;
    for (int r = 1; r <= n; ++r) {
      Matrix restricted = s;
      for (int d = 1; d <= n; ++d)
        if (d != r) restricted[0][d] = kNegInf;
      std::vector<int> candidate = Arborescence(restricted);
      double score = 0.0;
      for (int d = 1; d <= n; ++d) score += s[candidate[d]][d];
      if (best_heads.empty() || score > best_score) {
        best_score = score;
        best_heads = std::move(candidate);
      }
    }
    heads = std::move(best_heads);
  }
  return std::vector<int>(heads.begin() + 1, heads.end());
}

std::vector<int> DecodeHeads(const Tensor& arc, Decoder decoder) {
  return decoder == Decoder::kCle ? CleDecode(arc) : GreedyFixDecode(arc);
}

Decoder ParseDecoder(const std::string& name) {
  if (name == "greedy-fix" || name == "greedy") return Decoder::kGreedyFix;
  if (name == "cle") return Decoder::kCle;
  throw Error("unknown decoder '" + name + "' (expected greedy-fix or cle)");
}

std::string DecoderName(Decoder d) {
  return d == Decoder::kCle ? "cle" : "greedy-fix";
}

}  // namespace udparse
