#pragma once

// Reference solver for small deterministic MDPs. Deliberately free of any
// dependency on the library under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

/// Deterministic transition: `next < 0` means the episode terminates.
struct Edge {
  int next = -1;
  double reward = 0.0;
};

struct Mdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<std::vector<Edge>> edges;  // edges[s][a]
};

struct Solution {
  std::vector<std::vector<double>> q;
  std::vector<std::size_t> policy;  // lowest action index among maxima
  int sweeps = 0;
};

inline Solution value_iteration(const Mdp& m, double gamma, double tol = 1e-15, int max_sweeps = 100000) {
  std::vector<double> v(m.states, 0.0);
  Solution sol;
  sol.q.assign(m.states, std::vector<double>(m.actions, 0.0));
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double delta = 0.0;
    std::vector<double> nv(m.states, -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < m.states; ++s) {
      for (std::size_t a = 0; a < m.actions; ++a) {
        const Edge& e = m.edges[s][a];
        const double q = e.reward + (e.next < 0 ? 0.0 : gamma * v[static_cast<std::size_t>(e.next)]);
        sol.q[s][a] = q;
        nv[s] = std::max(nv[s], q);
      }
      delta = std::max(delta, std::abs(nv[s] - v[s]));
    }
    v = nv;
    sol.sweeps = sweep;
    if (delta < tol) break;
  }
  sol.policy.resize(m.states);
  for (std::size_t s = 0; s < m.states; ++s) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < m.actions; ++a)
      if (sol.q[s][a] > sol.q[s][best]) best = a;
    sol.policy[s] = best;
  }
  return sol;
}

/// Three states, two actions, acyclic with terminal exits.
inline Mdp three_state_dag() {
  Mdp m;
  m.states = 3;
  m.actions = 2;
  m.edges = {
      {{1, 0.0}, {2, 0.3}},
      {{2, 0.2}, {-1, 0.5}},
      {{-1, 1.0}, {-1, 0.4}},
  };
  return m;
}

/// Three states, two actions, no terminal states.
inline Mdp three_state_cycle() {
  Mdp m;
  m.states = 3;
  m.actions = 2;
  m.edges = {
      {{1, 0.0}, {0, 0.1}},
      {{2, 0.0}, {0, 0.2}},
      {{0, 1.0}, {2, 0.3}},
  };
  return m;
}

}  // namespace oracle
