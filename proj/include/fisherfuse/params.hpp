#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fisherfuse/matrix.hpp"
#include "fisherfuse/tape.hpp"

namespace ff {

/// Ordered collection of named parameter tensors. Order is the deterministic
/// update order for the optimizer.
struct ParamStore {
  std::vector<std::string> names;
  std::unordered_map<std::string, Matrix> tensors;

  void add(const std::string& name, Matrix m) {
    names.push_back(name);
    tensors.emplace(name, std::move(m));
  }
  Matrix& at(const std::string& name) { return tensors.at(name); }
  const Matrix& at(const std::string& name) const { return tensors.at(name); }
  bool has(const std::string& name) const { return tensors.count(name) > 0; }
};

/// Binds every parameter as a gradient-carrying leaf on a tape and remembers
/// the node index per name.
struct Bound {
  Tape* tape = nullptr;
  std::unordered_map<std::string, int> node_of;

  static Bound bind(Tape& t, const ParamStore& store) {
    Bound b;
    b.tape = &t;
    for (const std::string& n : store.names)
      b.node_of.emplace(n, t.leaf(store.at(n), true));
    return b;
  }
  int p(const std::string& name) const { return node_of.at(name); }
};

}  // namespace ff
