#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexfuse/tensor.hpp"

namespace lexfuse {

constexpr double kLogFloor = 1e-12;

// A named weight tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor(value.shape);
  }
};

// Creation-ordered store; the order drives RNG consumption at init time,
// Adam moment pairing and checkpoint layout, so it must stay stable.
class ParamStore {
 public:
  Parameter& create(const std::string& name, std::vector<int> shape) {
    if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    params_.push_back(std::make_unique<Parameter>(name, Tensor(std::move(shape))));
    index_[name] = params_.size() - 1;
    return *params_.back();
  }

  Parameter& create_glorot(const std::string& name, std::vector<int> shape, std::mt19937_64& rng) {
    Parameter& p = create(name, std::move(shape));
    glorot_fill(p.value, rng);
    return p;
  }

  Parameter* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Parameter& at(const std::string& name) {
    Parameter* p = find(name);
    if (!p) throw std::out_of_range("ParamStore: unknown parameter " + name);
    return *p;
  }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kNeg,
  kOneMinus,
  kScaleConst,
  kScaleVS,   // vector * scalar node
  kDivVS,     // vector / scalar node
  kAddVS,     // vector + broadcast scalar node
  kMatVec,
  kTanh,
  kSigmoid,
  kSoftmax,
  kLogFloor,
  kConcat,
  kSlice,
  kPick,
  kDot,
  kSum,
  kWeightedSum,  // inputs: [weights, v_0 .. v_{n-1}]
  kEmbedRow,
  kMix,  // gated mixture onto an extended vocabulary, see MixTable
};

// One (source position, extended slot, weight) contribution of the
// copy/dictionary term. Slots below vocab_size land on neural-lexicon ids.
struct MixEntry {
  int position;
  int slot;
  double weight;
};

struct MixTable {
  int vocab_size = 0;
  int extended_size = 0;
  std::vector<MixEntry> entries;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

struct TapeNode {
  Op op = Op::kLeaf;
  std::vector<int> inputs;
  Tensor value;
  Tensor grad;  // allocated during backward
  int index = 0;
  int extent = 0;
  double scalar = 0.0;
  const MixTable* mix = nullptr;
  Parameter* param = nullptr;
};

// Dynamically built computation graph. Node inputs always refer to earlier
// ids, so the graph is acyclic by construction and reverse id order is a
// reverse topological order.
class Tape {
 public:
  const Tensor& value(Var v) const { return node(v).value; }
  const Tensor& grad(Var v) const {
    if (!backward_done_) throw std::logic_error("Tape: gradients not computed yet");
    return node(v).grad;
  }
  double scalar_value(Var v) const {
    const Tensor& t = value(v);
    if (t.numel() != 1) throw std::logic_error("Tape: scalar_value on non-scalar");
    return t.data[0];
  }

  std::size_t node_count() const { return nodes_.size(); }

  Var leaf(Tensor t) {
    TapeNode n;
    n.op = Op::kLeaf;
    n.value = std::move(t);
    return push(std::move(n));
  }

  Var scalar_leaf(double v) { return leaf(Tensor::scalar(v)); }

  // Leaf bound to a parameter: backward accumulates into p.grad. Repeated
  // requests for the same parameter reuse the node.
  Var param(Parameter& p) {
    auto it = param_vars_.find(&p);
    if (it != param_vars_.end()) return it->second;
    TapeNode n;
    n.op = Op::kLeaf;
    n.value = p.value;
    n.param = &p;
    Var v = push(std::move(n));
    param_vars_[&p] = v;
    return v;
  }

  Var add(Var a, Var b) { return binary_same_shape(Op::kAdd, a, b); }
  Var sub(Var a, Var b) { return binary_same_shape(Op::kSub, a, b); }
  Var mul(Var a, Var b) { return binary_same_shape(Op::kMul, a, b); }

  Var neg(Var a) { return unary(Op::kNeg, a); }
  Var one_minus(Var a) { return unary(Op::kOneMinus, a); }
  Var tanh(Var a) { return unary(Op::kTanh, a); }
  Var sigmoid(Var a) { return unary(Op::kSigmoid, a); }
  Var log_floor(Var a) { return unary(Op::kLogFloor, a); }

  Var scale_const(Var a, double c) {
    TapeNode n;
    n.op = Op::kScaleConst;
    n.inputs = {a.id};
    n.scalar = c;
    n.value = value(a);
    for (double& v : n.value.data) v *= c;
    return push(std::move(n));
  }

  Var scale_vs(Var v, Var s) { return vs_op(Op::kScaleVS, v, s); }
  Var div_vs(Var v, Var s) { return vs_op(Op::kDivVS, v, s); }
  Var add_vs(Var v, Var s) { return vs_op(Op::kAddVS, v, s); }

  Var matvec(Var w, Var x) {
    const Tensor& wt = value(w);
    const Tensor& xt = value(x);
    if (wt.rank() != 2 || xt.rank() != 1) throw std::invalid_argument("matvec: expects matrix and vector");
    if (wt.cols() != static_cast<int>(xt.numel())) {
      throw std::invalid_argument("matvec: shape mismatch " + std::to_string(wt.cols()) + " vs " +
                                  std::to_string(xt.numel()));
    }
    TapeNode n;
    n.op = Op::kMatVec;
    n.inputs = {w.id, x.id};
    n.value = Tensor({wt.rows()});
    const int rows = wt.rows();
    const int cols = wt.cols();
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      const double* wr = wt.data.data() + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += wr[c] * xt.data[c];
      n.value.data[r] = acc;
    }
    return push(std::move(n));
  }

  Var affine(Var w, Var x, Var b) { return add(matvec(w, x), b); }

  Var softmax(Var a) {
    const Tensor& at = value(a);
    if (at.rank() != 1 || at.numel() == 0) throw std::invalid_argument("softmax: needs a non-empty vector");
    TapeNode n;
    n.op = Op::kSoftmax;
    n.inputs = {a.id};
    n.value = Tensor(at.shape);
    double mx = at.data[0];
    for (double v : at.data) mx = std::max(mx, v);
    double z = 0.0;
    for (std::size_t i = 0; i < at.numel(); ++i) {
      n.value.data[i] = std::exp(at.data[i] - mx);
      z += n.value.data[i];
    }
    for (double& v : n.value.data) v /= z;
    return push(std::move(n));
  }

  Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    TapeNode n;
    n.op = Op::kConcat;
    std::size_t total = 0;
    for (Var p : parts) total += value(p).numel();
    n.value = Tensor({static_cast<int>(total)});
    std::size_t off = 0;
    for (Var p : parts) {
      n.inputs.push_back(p.id);
      const Tensor& t = value(p);
      std::copy(t.data.begin(), t.data.end(), n.value.data.begin() + off);
      off += t.numel();
    }
    return push(std::move(n));
  }

  Var concat(Var a, Var b) { return concat(std::vector<Var>{a, b}); }

  Var slice(Var a, int offset, int length) {
    const Tensor& at = value(a);
    if (at.rank() != 1) throw std::invalid_argument("slice: vector expected");
    if (offset < 0 || length <= 0 || offset + length > static_cast<int>(at.numel())) {
      throw std::invalid_argument("slice: out of range");
    }
    TapeNode n;
    n.op = Op::kSlice;
    n.inputs = {a.id};
    n.index = offset;
    n.extent = length;
    n.value = Tensor({length});
    std::copy(at.data.begin() + offset, at.data.begin() + offset + length, n.value.data.begin());
    return push(std::move(n));
  }

  Var pick(Var a, int index) {
    const Tensor& at = value(a);
    if (at.rank() != 1 || index < 0 || index >= static_cast<int>(at.numel())) {
      throw std::invalid_argument("pick: index out of range");
    }
    TapeNode n;
    n.op = Op::kPick;
    n.inputs = {a.id};
    n.index = index;
    n.value = Tensor::scalar(at.data[index]);
    return push(std::move(n));
  }

  Var dot(Var a, Var b) {
    const Tensor& at = value(a);
    const Tensor& bt = value(b);
    if (!at.same_shape(bt) || at.rank() != 1) throw std::invalid_argument("dot: shape mismatch");
    TapeNode n;
    n.op = Op::kDot;
    n.inputs = {a.id, b.id};
    double acc = 0.0;
    for (std::size_t i = 0; i < at.numel(); ++i) acc += at.data[i] * bt.data[i];
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
  }

  Var sum(Var a) {
    TapeNode n;
    n.op = Op::kSum;
    n.inputs = {a.id};
    double acc = 0.0;
    for (double v : value(a).data) acc += v;
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
  }

  // y = sum_i w_i * v_i over equally shaped vectors v_i.
  Var weighted_sum(Var weights, const std::vector<Var>& vectors) {
    const Tensor& wt = value(weights);
    if (wt.rank() != 1 || wt.numel() != vectors.size()) {
      throw std::invalid_argument("weighted_sum: weight/vector count mismatch");
    }
    if (vectors.empty()) throw std::invalid_argument("weighted_sum: no vectors");
    TapeNode n;
    n.op = Op::kWeightedSum;
    n.inputs = {weights.id};
    const Tensor& v0 = value(vectors[0]);
    n.value = Tensor(v0.shape);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      const Tensor& vt = value(vectors[i]);
      if (!vt.same_shape(v0)) throw std::invalid_argument("weighted_sum: vector shape mismatch");
      n.inputs.push_back(vectors[i].id);
      const double wi = wt.data[i];
      for (std::size_t j = 0; j < vt.numel(); ++j) n.value.data[j] += wi * vt.data[j];
    }
    return push(std::move(n));
  }

  Var embed_row(Var matrix, int row) {
    const Tensor& mt = value(matrix);
    if (mt.rank() != 2 || row < 0 || row >= mt.rows()) throw std::invalid_argument("embed_row: bad row");
    TapeNode n;
    n.op = Op::kEmbedRow;
    n.inputs = {matrix.id};
    n.index = row;
    n.value = Tensor({mt.cols()});
    const double* src = mt.data.data() + static_cast<std::size_t>(row) * mt.cols();
    std::copy(src, src + mt.cols(), n.value.data.begin());
    return push(std::move(n));
  }

  // out[w] = gen_scale * p_dec[w] for w < vocab_size, plus
  // out[slot] += pos_weights[position] * weight for every table entry.
  // The table must outlive the tape.
  Var mix(Var p_dec, Var gen_scale, Var pos_weights, const MixTable& table) {
    const Tensor& pd = value(p_dec);
    const Tensor& pw = value(pos_weights);
    if (pd.rank() != 1 || static_cast<int>(pd.numel()) != table.vocab_size) {
      throw std::invalid_argument("mix: p_dec size mismatch");
    }
    if (value(gen_scale).numel() != 1) throw std::invalid_argument("mix: gen_scale must be scalar");
    if (table.extended_size < table.vocab_size) throw std::invalid_argument("mix: extended < vocab");
    TapeNode n;
    n.op = Op::kMix;
    n.inputs = {p_dec.id, gen_scale.id, pos_weights.id};
    n.mix = &table;
    n.value = Tensor({table.extended_size});
    const double g = scalar_value(gen_scale);
    for (int w = 0; w < table.vocab_size; ++w) n.value.data[w] = g * pd.data[w];
    for (const MixEntry& e : table.entries) {
      if (e.position < 0 || e.position >= static_cast<int>(pw.numel()) || e.slot < 0 ||
          e.slot >= table.extended_size) {
        throw std::invalid_argument("mix: table entry out of range");
      }
      n.value.data[e.slot] += pw.data[e.position] * e.weight;
    }
    return push(std::move(n));
  }

  // Reverse pass from a scalar loss. Each node is visited exactly once in
  // reverse creation (= reverse topological) order; parameter leaves
  // accumulate into Parameter::grad.
  void backward(Var loss) {
    if (backward_done_) throw std::logic_error("Tape: backward called twice without reset");
    const TapeNode& ln = node(loss);
    if (ln.value.numel() != 1) throw std::invalid_argument("Tape: backward needs a scalar loss");
    for (int id = 0; id <= loss.id; ++id) nodes_[id].grad = Tensor(nodes_[id].value.shape);
    nodes_[loss.id].grad.data[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) backward_node(id);
    backward_done_ = true;
  }

  void reset() {
    nodes_.clear();
    param_vars_.clear();
    backward_done_ = false;
  }

 private:
  const TapeNode& node(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) throw std::logic_error("Tape: invalid var");
    return nodes_[v.id];
  }

  Var push(TapeNode n) {
    const int id = static_cast<int>(nodes_.size());
    for (int in : n.inputs) {
      if (in < 0 || in >= id) throw std::logic_error("Tape: cycle or dangling input");
    }
    if (!n.value.all_finite()) throw std::domain_error("Tape: non-finite value produced by op");
    nodes_.push_back(std::move(n));
    return Var{id};
  }

  Var unary(Op op, Var a) {
    TapeNode n;
    n.op = op;
    n.inputs = {a.id};
    const Tensor& at = value(a);
    n.value = Tensor(at.shape);
    switch (op) {
      case Op::kNeg:
        for (std::size_t i = 0; i < at.numel(); ++i) n.value.data[i] = -at.data[i];
        break;
      case Op::kOneMinus:
        for (std::size_t i = 0; i < at.numel(); ++i) n.value.data[i] = 1.0 - at.data[i];
        break;
      case Op::kTanh:
        for (std::size_t i = 0; i < at.numel(); ++i) n.value.data[i] = std::tanh(at.data[i]);
        break;
      case Op::kSigmoid:
        for (std::size_t i = 0; i < at.numel(); ++i) n.value.data[i] = 1.0 / (1.0 + std::exp(-at.data[i]));
        break;
      case Op::kLogFloor:
        for (std::size_t i = 0; i < at.numel(); ++i) n.value.data[i] = std::log(std::max(at.data[i], kLogFloor));
        break;
      default:
        throw std::logic_error("unary: bad op");
    }
    return push(std::move(n));
  }

  Var binary_same_shape(Op op, Var a, Var b) {
    const Tensor& at = value(a);
    const Tensor& bt = value(b);
    if (!at.same_shape(bt)) throw std::invalid_argument("Tape: shape mismatch in elementwise op");
    TapeNode n;
    n.op = op;
    n.inputs = {a.id, b.id};
    n.value = Tensor(at.shape);
    for (std::size_t i = 0; i < at.numel(); ++i) {
      switch (op) {
        case Op::kAdd: n.value.data[i] = at.data[i] + bt.data[i]; break;
        case Op::kSub: n.value.data[i] = at.data[i] - bt.data[i]; break;
        case Op::kMul: n.value.data[i] = at.data[i] * bt.data[i]; break;
        default: throw std::logic_error("binary: bad op");
      }
    }
    return push(std::move(n));
  }

  Var vs_op(Op op, Var v, Var s) {
    const Tensor& vt = value(v);
    const Tensor& st = value(s);
    if (st.numel() != 1) throw std::invalid_argument("Tape: scalar operand must have one element");
    TapeNode n;
    n.op = op;
    n.inputs = {v.id, s.id};
    n.value = Tensor(vt.shape);
    const double sv = st.data[0];
    for (std::size_t i = 0; i < vt.numel(); ++i) {
      switch (op) {
        case Op::kScaleVS: n.value.data[i] = vt.data[i] * sv; break;
        case Op::kDivVS: n.value.data[i] = vt.data[i] / sv; break;
        case Op::kAddVS: n.value.data[i] = vt.data[i] + sv; break;
        default: throw std::logic_error("vs_op: bad op");
      }
    }
    return push(std::move(n));
  }

  void backward_node(int id) {
    TapeNode& n = nodes_[id];
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        if (n.param) {
          for (std::size_t i = 0; i < g.numel(); ++i) n.param->grad.data[i] += g.data[i];
        }
        break;
      case Op::kAdd: {
        accumulate(n.inputs[0], g);
        accumulate(n.inputs[1], g);
        break;
      }
      case Op::kSub: {
        accumulate(n.inputs[0], g);
        Tensor& db = nodes_[n.inputs[1]].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) db.data[i] -= g.data[i];
        break;
      }
      case Op::kMul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        Tensor& da = nodes_[n.inputs[0]].grad;
        Tensor& db = nodes_[n.inputs[1]].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          da.data[i] += g.data[i] * b.data[i];
          db.data[i] += g.data[i] * a.data[i];
        }
        break;
      }
      case Op::kNeg: {
        Tensor& da = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) da.data[i] -= g.data[i];
        break;
      }
      case Op::kOneMinus: {
        Tensor& da = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) da.data[i] -= g.data[i];
        break;
      }
      case Op::kScaleConst: {
        Tensor& da = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) da.data[i] += n.scalar * g.data[i];
        break;
      }
      case Op::kScaleVS: {
        const Tensor& v = nodes_[n.inputs[0]].value;
        const double s = nodes_[n.inputs[1]].value.data[0];
        Tensor& dv = nodes_[n.inputs[0]].grad;
        Tensor& ds = nodes_[n.inputs[1]].grad;
        double acc = 0.0;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          dv.data[i] += s * g.data[i];
          acc += g.data[i] * v.data[i];
        }
        ds.data[0] += acc;
        break;
      }
      case Op::kDivVS: {
        const Tensor& v = nodes_[n.inputs[0]].value;
        const double s = nodes_[n.inputs[1]].value.data[0];
        Tensor& dv = nodes_[n.inputs[0]].grad;
        Tensor& ds = nodes_[n.inputs[1]].grad;
        double acc = 0.0;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          dv.data[i] += g.data[i] / s;
          acc += g.data[i] * v.data[i];
        }
        ds.data[0] -= acc / (s * s);
        break;
      }
      case Op::kAddVS: {
        Tensor& dv = nodes_[n.inputs[0]].grad;
        Tensor& ds = nodes_[n.inputs[1]].grad;
        double acc = 0.0;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          dv.data[i] += g.data[i];
          acc += g.data[i];
        }
        ds.data[0] += acc;
        break;
      }
      case Op::kMatVec: {
        const Tensor& w = nodes_[n.inputs[0]].value;
        const Tensor& x = nodes_[n.inputs[1]].value;
        Tensor& dw = nodes_[n.inputs[0]].grad;
        Tensor& dx = nodes_[n.inputs[1]].grad;
        const int rows = w.rows();
        const int cols = w.cols();
        for (int r = 0; r < rows; ++r) {
          const double gr = g.data[r];
          if (gr == 0.0) continue;
          double* dwr = dw.data.data() + static_cast<std::size_t>(r) * cols;
          const double* wr = w.data.data() + static_cast<std::size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) {
            dwr[c] += gr * x.data[c];
            dx.data[c] += gr * wr[c];
          }
        }
        break;
      }
      case Op::kTanh: {
        Tensor& da = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double y = n.value.data[i];
          da.data[i] += g.data[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::kSigmoid: {
        Tensor& da = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          const double y = n.value.data[i];
          da.data[i] += g.data[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::kSoftmax: {
        Tensor& da = nodes_[n.inputs[0]].grad;
        double dotgy = 0.0;
        for (std::size_t i = 0; i < g.numel(); ++i) dotgy += g.data[i] * n.value.data[i];
        for (std::size_t i = 0; i < g.numel(); ++i) {
          da.data[i] += n.value.data[i] * (g.data[i] - dotgy);
        }
        break;
      }
      case Op::kLogFloor: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        Tensor& da = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
          if (a.data[i] > kLogFloor) da.data[i] += g.data[i] / a.data[i];
        }
        break;
      }
      case Op::kConcat: {
        std::size_t off = 0;
        for (int in : n.inputs) {
          Tensor& din = nodes_[in].grad;
          for (std::size_t i = 0; i < din.numel(); ++i) din.data[i] += g.data[off + i];
          off += din.numel();
        }
        break;
      }
      case Op::kSlice: {
        Tensor& da = nodes_[n.inputs[0]].grad;
        for (int i = 0; i < n.extent; ++i) da.data[n.index + i] += g.data[i];
        break;
      }
      case Op::kPick: {
        nodes_[n.inputs[0]].grad.data[n.index] += g.data[0];
        break;
      }
      case Op::kDot: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        Tensor& da = nodes_[n.inputs[0]].grad;
        Tensor& db = nodes_[n.inputs[1]].grad;
        const double gs = g.data[0];
        for (std::size_t i = 0; i < a.numel(); ++i) {
          da.data[i] += gs * b.data[i];
          db.data[i] += gs * a.data[i];
        }
        break;
      }
      case Op::kSum: {
        Tensor& da = nodes_[n.inputs[0]].grad;
        const double gs = g.data[0];
        for (std::size_t i = 0; i < da.numel(); ++i) da.data[i] += gs;
        break;
      }
      case Op::kWeightedSum: {
        const Tensor& w = nodes_[n.inputs[0]].value;
        Tensor& dw = nodes_[n.inputs[0]].grad;
        for (std::size_t i = 1; i < n.inputs.size(); ++i) {
          const Tensor& v = nodes_[n.inputs[i]].value;
          Tensor& dv = nodes_[n.inputs[i]].grad;
          const double wi = w.data[i - 1];
          double acc = 0.0;
          for (std::size_t j = 0; j < v.numel(); ++j) {
            dv.data[j] += wi * g.data[j];
            acc += g.data[j] * v.data[j];
          }
          dw.data[i - 1] += acc;
        }
        break;
      }
      case Op::kEmbedRow: {
        Tensor& dm = nodes_[n.inputs[0]].grad;
        const int cols = nodes_[n.inputs[0]].value.cols();
        double* row = dm.data.data() + static_cast<std::size_t>(n.index) * cols;
        for (int c = 0; c < cols; ++c) row[c] += g.data[c];
        break;
      }
      case Op::kMix: {
        const MixTable& table = *n.mix;
        const Tensor& pd = nodes_[n.inputs[0]].value;
        const double gen = nodes_[n.inputs[1]].value.data[0];
        Tensor& dpd = nodes_[n.inputs[0]].grad;
        Tensor& dgen = nodes_[n.inputs[1]].grad;
        Tensor& dpw = nodes_[n.inputs[2]].grad;
        double acc = 0.0;
        for (int w = 0; w < table.vocab_size; ++w) {
          dpd.data[w] += gen * g.data[w];
          acc += g.data[w] * pd.data[w];
        }
        dgen.data[0] += acc;
        for (const MixEntry& e : table.entries) {
          dpw.data[e.position] += e.weight * g.data[e.slot];
        }
        break;
      }
    }
  }

  void accumulate(int id, const Tensor& g) {
    Tensor& d = nodes_[id].grad;
    for (std::size_t i = 0; i < g.numel(); ++i) d.data[i] += g.data[i];
  }

  std::vector<TapeNode> nodes_;
  std::unordered_map<Parameter*, Var> param_vars_;
  bool backward_done_ = false;
};

struct LstmVars {
  Var hidden;
  Var cell;
};

// Single LSTM step. W is [4h x (in+h)], b is [4h]; gate order along the rows
// is input, forget, candidate, output. Forget-gate bias rows are the ones
// initialised to 1.
inline LstmVars lstm_cell(Tape& t, Var weights, Var bias, const LstmVars& prev, Var input) {
  const int h4 = static_cast<int>(t.value(bias).numel());
  if (h4 % 4 != 0) throw std::invalid_argument("lstm_cell: bias length must be 4h");
  const int h = h4 / 4;
  Var z = t.add(t.matvec(weights, t.concat(input, prev.hidden)), bias);
  Var gate_in = t.sigmoid(t.slice(z, 0, h));
  Var gate_forget = t.sigmoid(t.slice(z, h, h));
  Var candidate = t.tanh(t.slice(z, 2 * h, h));
  Var gate_out = t.sigmoid(t.slice(z, 3 * h, h));
  Var cell = t.add(t.mul(gate_forget, prev.cell), t.mul(gate_in, candidate));
  Var hidden = t.mul(gate_out, t.tanh(cell));
  return {hidden, cell};
}

// Max over all parameter coordinates of the relative disagreement between the
// analytic gradient and a central finite difference. `build` must be a pure
// function of the store contents.
inline double grad_check(ParamStore& params, const std::function<Var(Tape&)>& build, double eps = 1e-4) {
  Tape tape;
  Var loss = build(tape);
  params.zero_grads();
  tape.backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) analytic.push_back(params[i].grad);

  auto eval = [&](void) {
    Tape probe;
    double v = probe.scalar_value(build(probe));
    if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite loss at probe point");
    return v;
  };

  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& value = params[p].value;
    for (std::size_t j = 0; j < value.numel(); ++j) {
      const double saved = value.data[j];
      value.data[j] = saved + eps;
      const double f_plus = eval();
      value.data[j] = saved - eps;
      const double f_minus = eval();
      value.data[j] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[p].data[j];
      const double rel = std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace lexfuse
