#include "modpair/autodiff.hpp"

#include <cmath>

#include <json.hpp>

namespace modpair::ad {

namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace

const Matrix& Value::data() const { return tape_->node(*this).data; }
const Matrix& Value::grad() const { return tape_->node(*this).grad; }

Parameter& ParamStore::create(const std::string& name, int rows, int cols) {
  if (params_.count(name)) throw StateError("parameter '" + name + "' already registered");
  Parameter p;
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  p.m = Matrix::Zero(rows, cols);
  p.v = Matrix::Zero(rows, cols);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw StateError("unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw StateError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) p.grad.setZero();
  has_grads_ = false;
}

Value Tape::make(Matrix data, std::vector<int> inputs, const char* op,
                 std::function<void(Tape&, int)> adjoint) {
  Node n;
  n.data = std::move(data);
  n.inputs = std::move(inputs);
  n.op = op;
  n.adjoint = std::move(adjoint);
  for (int i : n.inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  nodes_.push_back(std::move(n));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad_of(int index) {
  Node& n = nodes_[index];
  if (!n.grad_ready) {
    n.grad = Matrix::Zero(n.data.rows(), n.data.cols());
    n.grad_ready = true;
  }
  return n.grad;
}

void Tape::check_same_tape(Value v) const {
  if (v.tape_ != this) throw StateError("value belongs to a different tape");
}

Value Tape::constant(Matrix m) {
  return make(std::move(m), {}, "constant", nullptr);
}

Value Tape::input(Matrix m) {
  Value v = make(std::move(m), {}, "input", nullptr);
  node(v).requires_grad = true;
  return v;
}

Value Tape::param(ParamStore& store, const std::string& name) {
  Parameter& p = store.at(name);
  auto it = param_leaves_.find(&p);
  if (it != param_leaves_.end()) return Value(this, it->second);
  Value v = make(p.value, {}, "param", nullptr);
  Node& n = node(v);
  n.requires_grad = true;
  n.bound = &p;
  n.store = &store;
  param_leaves_[&p] = v.index_;
  return v;
}

Value Tape::add(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  require_same_shape(a.data(), b.data(), "add");
  const int ia = a.index_, ib = b.index_;
  return make(a.data() + b.data(), {ia, ib}, "add", [ia, ib](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.nodes_[ia].requires_grad) t.grad_of(ia) += g;
    if (t.nodes_[ib].requires_grad) t.grad_of(ib) += g;
  });
}

Value Tape::sub(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  require_same_shape(a.data(), b.data(), "sub");
  const int ia = a.index_, ib = b.index_;
  return make(a.data() - b.data(), {ia, ib}, "sub", [ia, ib](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.nodes_[ia].requires_grad) t.grad_of(ia) += g;
    if (t.nodes_[ib].requires_grad) t.grad_of(ib) -= g;
  });
}

Value Tape::mul(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  require_same_shape(a.data(), b.data(), "mul");
  const int ia = a.index_, ib = b.index_;
  return make(a.data().cwiseProduct(b.data()), {ia, ib}, "mul", [ia, ib](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.nodes_[ia].requires_grad) t.grad_of(ia) += g.cwiseProduct(t.nodes_[ib].data);
    if (t.nodes_[ib].requires_grad) t.grad_of(ib) += g.cwiseProduct(t.nodes_[ia].data);
  });
}

Value Tape::matmul(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  if (a.data().cols() != b.data().rows()) {
    throw ShapeError("matmul: shapes " + shape_str(a.data()) + " vs " + shape_str(b.data()));
  }
  const int ia = a.index_, ib = b.index_;
  return make(a.data() * b.data(), {ia, ib}, "matmul", [ia, ib](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.nodes_[ia].requires_grad) t.grad_of(ia) += g * t.nodes_[ib].data.transpose();
    if (t.nodes_[ib].requires_grad) t.grad_of(ib) += t.nodes_[ia].data.transpose() * g;
  });
}

Value Tape::scale(Value a, Scalar c) {
  check_same_tape(a);
  const int ia = a.index_;
  return make(a.data() * c, {ia}, "scale", [ia, c](Tape& t, int self) {
    if (t.nodes_[ia].requires_grad) t.grad_of(ia) += t.nodes_[self].grad * c;
  });
}

Value Tape::add_const(Value a, Scalar c) {
  check_same_tape(a);
  const int ia = a.index_;
  return make((a.data().array() + c).matrix(), {ia}, "add_const", [ia](Tape& t, int self) {
    if (t.nodes_[ia].requires_grad) t.grad_of(ia) += t.nodes_[self].grad;
  });
}

Value Tape::transpose(Value a) {
  check_same_tape(a);
  const int ia = a.index_;
  return make(a.data().transpose(), {ia}, "transpose", [ia](Tape& t, int self) {
    if (t.nodes_[ia].requires_grad) t.grad_of(ia) += t.nodes_[self].grad.transpose();
  });
}

Value Tape::concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  std::vector<int> idx;
  long rows = 0;
  const long cols = parts[0].data().cols();
  for (Value v : parts) {
    check_same_tape(v);
    if (v.data().cols() != cols) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(v.data()));
    }
    rows += v.data().rows();
    idx.push_back(v.index_);
  }
  Matrix out(rows, cols);
  long at = 0;
  for (Value v : parts) {
    out.middleRows(at, v.data().rows()) = v.data();
    at += v.data().rows();
  }
  return make(std::move(out), idx, "concat_rows", [idx](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    long at = 0;
    for (int i : idx) {
      const long r = t.nodes_[i].data.rows();
      if (t.nodes_[i].requires_grad) t.grad_of(i) += g.middleRows(at, r);
      at += r;
    }
  });
}

Value Tape::concat_cols(Value a, Value b) {
  check_same_tape(a);
  check_same_tape(b);
  if (a.data().rows() != b.data().rows()) {
    throw ShapeError("concat_cols: shapes " + shape_str(a.data()) + " vs " +
                     shape_str(b.data()));
  }
  const int ia = a.index_, ib = b.index_;
  Matrix out(a.data().rows(), a.data().cols() + b.data().cols());
  out.leftCols(a.data().cols()) = a.data();
  out.rightCols(b.data().cols()) = b.data();
  return make(std::move(out), {ia, ib}, "concat_cols", [ia, ib](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    const long ca = t.nodes_[ia].data.cols();
    const long cb = t.nodes_[ib].data.cols();
    if (t.nodes_[ia].requires_grad) t.grad_of(ia) += g.leftCols(ca);
    if (t.nodes_[ib].requires_grad) t.grad_of(ib) += g.rightCols(cb);
  });
}

Value Tape::slice_rows(Value a, int begin, int count) {
  check_same_tape(a);
  if (begin < 0 || count < 1 || begin + count > a.data().rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " + shape_str(a.data()));
  }
  const int ia = a.index_;
  return make(a.data().middleRows(begin, count), {ia}, "slice_rows",
              [ia, begin, count](Tape& t, int self) {
                if (t.nodes_[ia].requires_grad) {
                  t.grad_of(ia).middleRows(begin, count) += t.nodes_[self].grad;
                }
              });
}

Value Tape::gather_rows(Value a, const std::vector<int>& rows) {
  check_same_tape(a);
  for (int r : rows) {
    if (r < 0 || r >= a.data().rows()) {
      throw ShapeError("gather_rows: row " + std::to_string(r) + " out of " +
                       shape_str(a.data()));
    }
  }
  const int ia = a.index_;
  Matrix out(static_cast<long>(rows.size()), a.data().cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = a.data().row(rows[i]);
  return make(std::move(out), {ia}, "gather_rows", [ia, rows](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    Matrix& ga = t.grad_of(ia);
    const Matrix& g = t.nodes_[self].grad;
    for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(i);
  });
}

Value Tape::softmax_row(Value a) {
  check_same_tape(a);
  Matrix y = a.data();
  for (long r = 0; r < y.rows(); ++r) {
    const Scalar mx = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - mx).exp();
    y.row(r) /= y.row(r).sum();
  }
  const int ia = a.index_;
  return make(std::move(y), {ia}, "softmax_row", [ia](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    const Matrix& y = t.nodes_[self].data;
    const Matrix& g = t.nodes_[self].grad;
    Matrix& ga = t.grad_of(ia);
    for (long r = 0; r < y.rows(); ++r) {
      const Scalar dot = g.row(r).cwiseProduct(y.row(r)).sum();
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Value Tape::masked_softmax_row(Value a, const MaskMatrix& allowed) {
  check_same_tape(a);
  if (allowed.rows() != a.data().rows() || allowed.cols() != a.data().cols()) {
    throw ShapeError("masked_softmax_row: mask shape mismatch");
  }
  Matrix y = Matrix::Zero(a.data().rows(), a.data().cols());
  for (long r = 0; r < y.rows(); ++r) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (long c = 0; c < y.cols(); ++c) {
      if (allowed(r, c)) mx = std::max(mx, a.data()(r, c));
    }
    if (!std::isfinite(mx)) {
      throw DomainError("masked_softmax_row: row " + std::to_string(r) +
                        " has no allowed entry");
    }
    Scalar z = 0;
    for (long c = 0; c < y.cols(); ++c) {
      if (allowed(r, c)) {
        y(r, c) = std::exp(a.data()(r, c) - mx);
        z += y(r, c);
      }
    }
    y.row(r) /= z;
  }
  const int ia = a.index_;
  MaskMatrix mask = allowed;
  return make(std::move(y), {ia}, "masked_softmax_row", [ia, mask](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    const Matrix& y = t.nodes_[self].data;
    const Matrix& g = t.nodes_[self].grad;
    Matrix& ga = t.grad_of(ia);
    for (long r = 0; r < y.rows(); ++r) {
      Scalar dot = 0;
      for (long c = 0; c < y.cols(); ++c) {
        if (mask(r, c)) dot += g(r, c) * y(r, c);
      }
      for (long c = 0; c < y.cols(); ++c) {
        if (mask(r, c)) ga(r, c) += y(r, c) * (g(r, c) - dot);
      }
    }
  });
}

Value Tape::log(Value a) {
  check_same_tape(a);
  if ((a.data().array() <= 0.0).any()) {
    throw DomainError("log: nonpositive entry");
  }
  const int ia = a.index_;
  return make(a.data().array().log().matrix(), {ia}, "log", [ia](Tape& t, int self) {
    if (t.nodes_[ia].requires_grad) {
      t.grad_of(ia) +=
          t.nodes_[self].grad.cwiseQuotient(t.nodes_[ia].data);
    }
  });
}

Value Tape::exp(Value a) {
  check_same_tape(a);
  const int ia = a.index_;
  return make(a.data().array().exp().matrix(), {ia}, "exp", [ia](Tape& t, int self) {
    if (t.nodes_[ia].requires_grad) {
      t.grad_of(ia) += t.nodes_[self].grad.cwiseProduct(t.nodes_[self].data);
    }
  });
}

Value Tape::sigmoid(Value a) {
  check_same_tape(a);
  Matrix y = (1.0 / (1.0 + (-a.data().array()).exp())).matrix();
  const int ia = a.index_;
  return make(std::move(y), {ia}, "sigmoid", [ia](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    const auto& y = t.nodes_[self].data.array();
    t.grad_of(ia) += (t.nodes_[self].grad.array() * y * (1.0 - y)).matrix();
  });
}

Value Tape::tanh(Value a) {
  check_same_tape(a);
  const int ia = a.index_;
  return make(a.data().array().tanh().matrix(), {ia}, "tanh", [ia](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    const auto& y = t.nodes_[self].data.array();
    t.grad_of(ia) += (t.nodes_[self].grad.array() * (1.0 - y * y)).matrix();
  });
}

Value Tape::relu(Value a) {
  check_same_tape(a);
  const int ia = a.index_;
  return make(a.data().cwiseMax(0.0), {ia}, "relu", [ia](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    const auto mask = (t.nodes_[ia].data.array() > 0.0).cast<Scalar>();
    t.grad_of(ia) += (t.nodes_[self].grad.array() * mask).matrix();
  });
}

Value Tape::softplus(Value a) {
  check_same_tape(a);
  Matrix y = a.data();
  for (long r = 0; r < y.rows(); ++r) {
    for (long c = 0; c < y.cols(); ++c) {
      const Scalar x = y(r, c);
      y(r, c) = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    }
  }
  const int ia = a.index_;
  return make(std::move(y), {ia}, "softplus", [ia](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    const auto sig = (1.0 / (1.0 + (-t.nodes_[ia].data.array()).exp()));
    t.grad_of(ia) += (t.nodes_[self].grad.array() * sig).matrix();
  });
}

Value Tape::pow_const(Value a, Scalar c) {
  check_same_tape(a);
  if (c < 1.0 && (a.data().array() <= 0.0).any()) {
    throw DomainError("pow_const: nonpositive entry with exponent < 1");
  }
  const int ia = a.index_;
  return make(a.data().array().pow(c).matrix(), {ia}, "pow_const", [ia, c](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    const auto& x = t.nodes_[ia].data.array();
    t.grad_of(ia) += (t.nodes_[self].grad.array() * c * x.pow(c - 1.0)).matrix();
  });
}

Value Tape::sum(Value a) {
  check_same_tape(a);
  Matrix out(1, 1);
  out(0, 0) = a.data().sum();
  const int ia = a.index_;
  return make(std::move(out), {ia}, "sum", [ia](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    t.grad_of(ia).array() += t.nodes_[self].grad(0, 0);
  });
}

Value Tape::mean(Value a) {
  check_same_tape(a);
  Matrix out(1, 1);
  out(0, 0) = a.data().mean();
  const int ia = a.index_;
  const Scalar inv = 1.0 / static_cast<Scalar>(a.data().size());
  return make(std::move(out), {ia}, "mean", [ia, inv](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    t.grad_of(ia).array() += t.nodes_[self].grad(0, 0) * inv;
  });
}

Value Tape::reshape_row(Value a) {
  check_same_tape(a);
  const int ia = a.index_;
  const long r = a.data().rows(), c = a.data().cols();
  Matrix out(1, r * c);
  long k = 0;
  for (long i = 0; i < r; ++i) {
    for (long j = 0; j < c; ++j) out(0, k++) = a.data()(i, j);
  }
  return make(std::move(out), {ia}, "reshape_row", [ia, r, c](Tape& t, int self) {
    if (!t.nodes_[ia].requires_grad) return;
    Matrix& ga = t.grad_of(ia);
    const Matrix& g = t.nodes_[self].grad;
    long k = 0;
    for (long i = 0; i < r; ++i) {
      for (long j = 0; j < c; ++j) ga(i, j) += g(0, k++);
    }
  });
}

Value Tape::weighted_sum(Value dist, Value m) {
  check_same_tape(dist);
  check_same_tape(m);
  if (dist.data().rows() != 1 || dist.data().cols() != m.data().rows()) {
    throw ShapeError("weighted_sum: shapes " + shape_str(dist.data()) + " vs " +
                     shape_str(m.data()));
  }
  const int id = dist.index_, im = m.index_;
  return make(dist.data() * m.data(), {id, im}, "weighted_sum", [id, im](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.nodes_[id].requires_grad) t.grad_of(id) += g * t.nodes_[im].data.transpose();
    if (t.nodes_[im].requires_grad) t.grad_of(im) += t.nodes_[id].data.transpose() * g;
  });
}

Value Tape::mul_scalar(Value a, Value s) {
  check_same_tape(a);
  check_same_tape(s);
  if (s.data().rows() != 1 || s.data().cols() != 1) {
    throw ShapeError("mul_scalar: scalar operand has shape " + shape_str(s.data()));
  }
  const int ia = a.index_, is = s.index_;
  return make(a.data() * s.data()(0, 0), {ia, is}, "mul_scalar", [ia, is](Tape& t, int self) {
    const Matrix& g = t.nodes_[self].grad;
    if (t.nodes_[ia].requires_grad) t.grad_of(ia) += g * t.nodes_[is].data(0, 0);
    if (t.nodes_[is].requires_grad) {
      t.grad_of(is)(0, 0) += g.cwiseProduct(t.nodes_[ia].data).sum();
    }
  });
}

Value Tape::kl_divergence(Value p, Value q, Scalar eps) {
  check_same_tape(p);
  check_same_tape(q);
  if (eps <= 0) throw DomainError("kl_divergence: eps must be > 0");
  if (p.data().rows() != 1 || q.data().rows() != 1) {
    throw ShapeError("kl_divergence: expects row distributions");
  }
  if (p.data().cols() != q.data().cols()) {
    throw ShapeError("kl_divergence: lengths " + shape_str(p.data()) + " vs " +
                     shape_str(q.data()));
  }
  for (Value v : {p, q}) {
    if ((v.data().array() < -1e-9).any()) {
      throw DomainError("kl_divergence: negative probability mass");
    }
    const Scalar s = v.data().sum();
    if (std::abs(s - 1.0) > 1e-6) {
      throw DomainError("kl_divergence: distribution sums to " + std::to_string(s));
    }
  }
  // composed from primitives; adjoints come for free
  Value diff = sub(log(add_const(p, eps)), log(add_const(q, eps)));
  return sum(mul(p, diff));
}

void Tape::backward(Value loss) {
  check_same_tape(loss);
  if (backward_done_) {
    throw StateError("backward already ran on this tape; call reset_grads() first");
  }
  const Node& ln = node(loss);
  if (ln.data.rows() != 1 || ln.data.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_str(ln.data));
  }
  backward_done_ = true;

  // reachable set via reverse DFS over input edges
  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<int> stack = {loss.index_};
  reachable[loss.index_] = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j : nodes_[i].inputs) {
      if (!reachable[j]) {
        reachable[j] = 1;
        stack.push_back(j);
      }
    }
  }

  grad_of(loss.index_)(0, 0) = 1.0;
  last_visits_ = 0;
  for (int i = loss.index_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!reachable[i] || !n.requires_grad) continue;
    if (!n.grad_ready) grad_of(i);  // node never received gradient; treat as zero
    if (n.adjoint) {
      n.adjoint(*this, i);
      ++last_visits_;
    }
    if (n.bound != nullptr) {
      n.bound->grad += n.grad;
      n.store->mark_grads();
    }
  }
}

void Tape::reset_grads() {
  for (Node& n : nodes_) {
    n.grad_ready = false;
    n.grad.resize(0, 0);
  }
  backward_done_ = false;
}

void sgd_step(ParamStore& store, Scalar lr) {
  if (!store.has_grads()) throw StateError("sgd_step: no gradients to apply");
  for (auto& [name, p] : store.entries()) {
    p.value -= lr * p.grad;
  }
  store.step_count()++;
  store.zero_grads();
}

void adam_step(ParamStore& store, Scalar lr, Scalar beta1, Scalar beta2, Scalar eps) {
  if (!store.has_grads()) throw StateError("adam_step: no gradients to apply");
  const std::int64_t t = store.step_count() + 1;
  const Scalar bc1 = 1.0 - std::pow(beta1, static_cast<Scalar>(t));
  const Scalar bc2 = 1.0 - std::pow(beta2, static_cast<Scalar>(t));
  for (auto& [name, p] : store.entries()) {
    p.m = beta1 * p.m + (1.0 - beta1) * p.grad;
    p.v = beta2 * p.v + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
    const Matrix mhat = p.m / bc1;
    const Matrix vhat = p.v / bc2;
    p.value.array() -= lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
  store.step_count() = t;
  store.zero_grads();
}

std::string params_to_json(const ParamStore& store) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, p] : store.entries()) {
    nlohmann::json entry;
    entry["shape"] = {p.value.rows(), p.value.cols()};
    std::vector<Scalar> data;
    data.reserve(p.value.size());
    for (long r = 0; r < p.value.rows(); ++r) {
      for (long c = 0; c < p.value.cols(); ++c) data.push_back(p.value(r, c));
    }
    entry["data"] = data;
    j[name] = entry;
  }
  return j.dump();
}

void params_from_json(const std::string& json_text, ParamStore& store) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  for (const auto& [name, entry] : j.items()) {
    const long rows = entry.at("shape").at(0).get<long>();
    const long cols = entry.at("shape").at(1).get<long>();
    Parameter& p = store.contains(name) ? store.at(name)
                                        : store.create(name, static_cast<int>(rows),
                                                       static_cast<int>(cols));
    if (p.value.rows() != rows || p.value.cols() != cols) {
      throw ShapeError("checkpoint parameter '" + name + "' shape mismatch");
    }
    const std::vector<Scalar> data = entry.at("data").get<std::vector<Scalar>>();
    if (static_cast<long>(data.size()) != rows * cols) {
      throw ShapeError("checkpoint parameter '" + name + "' data length mismatch");
    }
    long k = 0;
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) p.value(r, c) = data[k++];
    }
  }
}

}  // namespace modpair::ad
