#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "modpair/algebra.hpp"
#include "modpair/errors.hpp"

namespace modpair::ad {

class Tape;

/// Handle to one node of a computation tape. Cheap to copy; the tape owns
/// the storage.
class Value {
 public:
  Value() = default;

  const Matrix& data() const;
  const Matrix& grad() const;  // valid after Tape::backward
  int rows() const { return static_cast<int>(data().rows()); }
  int cols() const { return static_cast<int>(data().cols()); }
  bool defined() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Value(Tape* tape, int index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  int index_ = -1;
};

/// A named trainable parameter with its gradient accumulator and Adam
/// moments.
struct Parameter {
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
};

/// Named parameters plus optimizer state. One training run owns its store
/// exclusively.
class ParamStore {
 public:
  /// Registers a zero-initialized parameter; name must be fresh.
  Parameter& create(const std::string& name, int rows, int cols);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  const std::map<std::string, Parameter>& entries() const { return params_; }
  std::map<std::string, Parameter>& entries() { return params_; }

  void zero_grads();
  void mark_grads() { has_grads_ = true; }
  bool has_grads() const { return has_grads_; }
  void clear_grad_flag() { has_grads_ = false; }

  std::int64_t step_count() const { return step_count_; }
  std::int64_t& step_count() { return step_count_; }

 private:
  std::map<std::string, Parameter> params_;
  bool has_grads_ = false;
  std::int64_t step_count_ = 0;
};

/// Records forward operations and replays their adjoints in reverse.
/// Nodes are appended in dependency order, so reverse creation order is a
/// reverse topological order of the DAG.
class Tape {
 public:
  // ---- leaves
  Value constant(Matrix m);
  Value input(Matrix m);  // differentiable leaf (free variable)
  /// Leaf bound to a store parameter; backward accumulates into the
  /// parameter's grad. Repeated lookups of the same parameter share a node.
  Value param(ParamStore& store, const std::string& name);

  // ---- primitives
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);  // elementwise
  Value matmul(Value a, Value b);
  Value scale(Value a, Scalar c);
  Value add_const(Value a, Scalar c);
  Value transpose(Value a);
  Value concat_rows(const std::vector<Value>& parts);
  Value concat_cols(Value a, Value b);
  Value slice_rows(Value a, int begin, int count);
  Value gather_rows(Value a, const std::vector<int>& rows);
  Value softmax_row(Value a);
  /// Row softmax restricted to `allowed` entries; disallowed entries are
  /// exactly zero (and receive zero gradient). Throws DomainError if a row
  /// has no allowed entry.
  Value masked_softmax_row(Value a, const MaskMatrix& allowed);
  Value log(Value a);   // requires strictly positive entries
  Value exp(Value a);
  Value sigmoid(Value a);
  Value tanh(Value a);
  Value relu(Value a);
  Value softplus(Value a);
  Value pow_const(Value a, Scalar c);  // entries must be > 0 when c < 1
  Value sum(Value a);   // 1x1
  Value mean(Value a);  // 1x1
  Value reshape_row(Value a);  // row-major flatten to 1 x (r*c)
  Value weighted_sum(Value dist, Value m);  // (1xn) . (nxd) -> (1xd)
  Value mul_scalar(Value a, Value s);       // s is 1x1, broadcast multiply

  /// One direction of the smoothed KL divergence:
  ///   sum_i p_i (log(p_i + eps) - log(q_i + eps)).
  /// p and q must be row vectors of equal length that are nonnegative and
  /// sum to 1 within 1e-6 (DomainError otherwise).
  Value kl_divergence(Value p, Value q, Scalar eps = 1e-8);

  /// Populates gradients of every differentiable node reachable from
  /// `loss` (a 1x1 value) and accumulates into bound parameters. Throws
  /// StateError when called a second time without reset_grads().
  void backward(Value loss);
  void reset_grads();

  int size() const { return static_cast<int>(nodes_.size()); }
  /// Number of adjoint applications in the last backward (one per visited
  /// record).
  int last_backward_visits() const { return last_visits_; }

 private:
  friend class Value;
  struct Node {
    Matrix data;
    Matrix grad;
    bool requires_grad = false;
    bool grad_ready = false;
    Parameter* bound = nullptr;
    ParamStore* store = nullptr;
    std::vector<int> inputs;
    std::function<void(Tape&, int)> adjoint;  // reads grad of `self`, accumulates into inputs
    const char* op = "";
  };

  Value make(Matrix data, std::vector<int> inputs, const char* op,
             std::function<void(Tape&, int)> adjoint);
  Node& node(Value v) { return nodes_[v.index_]; }
  const Node& node(Value v) const { return nodes_[v.index_]; }
  Matrix& grad_of(int index);
  void check_same_tape(Value v) const;

  std::vector<Node> nodes_;
  std::map<const Parameter*, int> param_leaves_;
  bool backward_done_ = false;
  int last_visits_ = 0;
};

/// w <- w - lr * g for every parameter; zeroes grads.
void sgd_step(ParamStore& store, Scalar lr);

/// Bias-corrected Adam; zeroes grads.
void adam_step(ParamStore& store, Scalar lr, Scalar beta1 = 0.9, Scalar beta2 = 0.999,
               Scalar eps = 1e-8);

/// Parameter values as a JSON-ready map {name: {"shape": [r, c], "data":
/// row-major values}}; used by the versioned checkpoint files.
std::string params_to_json(const ParamStore& store);
void params_from_json(const std::string& json_text, ParamStore& store);

}  // namespace modpair::ad
