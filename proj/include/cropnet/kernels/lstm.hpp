#pragma once

// LSTM cell with explicit backpropagation through time, stacked and
// bidirectional wrappers, and the attention-pooled bidirectional encoder.
//
// Gate blocks are laid out [input, forget, cell, output] along the 4h axis of
// every weight and bias; checkpoints depend on this order.

#include <string>
#include <vector>

#include "cropnet/kernels/layers.hpp"

namespace cropnet::kernels {

struct LstmCell {
  Param* w_input = nullptr;      // 4h x d
  Param* w_recurrent = nullptr;  // 4h x h
  Param* bias = nullptr;         // 1 x 4h

  struct Cache {
    Tensor2 x, h_prev, c_prev;
    Tensor2 i, f, g, o;  // post-activation gates
    Tensor2 c, tanh_c;
  };

  static LstmCell create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden) {
    return {store.add(name + ".w_input", 4 * hidden, in), store.add(name + ".w_recurrent", 4 * hidden, hidden),
            store.add(name + ".bias", 1, 4 * hidden)};
  }

  Eigen::Index hidden() const { return w_recurrent->value.cols(); }
  Eigen::Index in_dim() const { return w_input->value.cols(); }

  // Uniform fan-in init, forget-gate bias set to 1.
  void init(Rng& rng) const {
    init_uniform(*w_input, hidden(), rng);
    init_uniform(*w_recurrent, hidden(), rng);
    init_uniform(*bias, hidden(), rng);
    bias->value.block(0, hidden(), 1, hidden()).setOnes();
  }

  void forward(const Tensor2& x, const Tensor2& h_prev, const Tensor2& c_prev, Cache& cache) const {
    require_cols(x, in_dim(), ("lstm " + w_input->name + " input").c_str());
    if (!x.allFinite()) throw NumericError("non-finite activation entering " + w_input->name);
    Tensor2 pre = x * w_input->value.transpose();
    pre.rowwise() += bias->value.row(0);
    step(pre, h_prev, c_prev, cache);
    cache.x = x;
  }

  // Recurrent half of a step; `pre` already holds x * w_input^T + bias.
  void step(const Eigen::Ref<const Tensor2>& pre, const Tensor2& h_prev, const Tensor2& c_prev, Cache& cache) const {
    const Eigen::Index h = hidden();
    require_shape(h_prev, pre.rows(), h, "lstm h_prev");
    require_shape(c_prev, pre.rows(), h, "lstm c_prev");

    Tensor2 gates = pre;
    gates.noalias() += h_prev * w_recurrent->value.transpose();

    cache.h_prev = h_prev;
    cache.c_prev = c_prev;
    cache.i = sigmoid(gates.middleCols(0, h));
    cache.f = sigmoid(gates.middleCols(h, h));
    cache.g = tanh(gates.middleCols(2 * h, h));
    cache.o = sigmoid(gates.middleCols(3 * h, h));
    cache.c = (cache.f.array() * c_prev.array() + cache.i.array() * cache.g.array()).matrix();
    cache.tanh_c = tanh(cache.c);
  }

  Tensor2 h_of(const Cache& cache) const { return (cache.o.array() * cache.tanh_c.array()).matrix(); }

  // dh, dc: gradients flowing into this step's h and c.
  void backward(const Cache& cache, const Tensor2& dh, const Tensor2& dc, Tensor2& dx, Tensor2& dh_prev,
                Tensor2& dc_prev) const {
    const Tensor2 dgates = step_backward(cache, dh, dc, dh_prev, dc_prev);
    w_input->grad.noalias() += dgates.transpose() * cache.x;
    dx = dgates * w_input->value;
  }

  // Recurrent half of backward: accumulates w_recurrent and bias gradients and
  // returns the gradient on the pre-activation gates.
  Tensor2 step_backward(const Cache& cache, const Tensor2& dh, const Tensor2& dc, Tensor2& dh_prev,
                        Tensor2& dc_prev) const {
    const Eigen::Index h = hidden();
    const auto o = cache.o.array();
    const auto tc = cache.tanh_c.array();
    const Array2 dct = dc.array() + dh.array() * o * (1.0 - tc.square());

    Tensor2 dgates(cache.h_prev.rows(), 4 * h);
    dgates.middleCols(0, h) = (dct * cache.g.array() * cache.i.array() * (1.0 - cache.i.array())).matrix();
    dgates.middleCols(h, h) = (dct * cache.c_prev.array() * cache.f.array() * (1.0 - cache.f.array())).matrix();
    dgates.middleCols(2 * h, h) = (dct * cache.i.array() * (1.0 - cache.g.array().square())).matrix();
    dgates.middleCols(3 * h, h) = (dh.array() * tc * o * (1.0 - o)).matrix();

    w_recurrent->grad.noalias() += dgates.transpose() * cache.h_prev;
    bias->grad.row(0) += dgates.colwise().sum();

    dh_prev = dgates * w_recurrent->value;
    dc_prev = (dct * cache.f.array()).matrix();
    return dgates;
  }
};

// One direction over a sequence, zero initial state. The input projection of
// every step is one product over the time-stacked inputs.
struct LstmTrace {
  std::vector<LstmCell::Cache> steps;  // indexed by time, whatever the direction
  Tensor2 inputs;                      // step t occupies rows [t*B, (t+1)*B)
  bool reverse = false;
};

inline std::vector<Tensor2> run_lstm(const LstmCell& cell, const std::vector<Tensor2>& xs, bool reverse,
                                     LstmTrace& trace) {
  const std::size_t t_len = xs.size();
  trace.steps.assign(t_len, {});
  trace.reverse = reverse;
  std::vector<Tensor2> hs(t_len);
  if (t_len == 0) return hs;
  const Eigen::Index b = xs.front().rows();
  trace.inputs.resize(b * static_cast<Eigen::Index>(t_len), cell.in_dim());
  for (std::size_t t = 0; t < t_len; ++t) {
    require_shape(xs[t], b, cell.in_dim(), ("lstm " + cell.w_input->name + " input").c_str());
    trace.inputs.middleRows(static_cast<Eigen::Index>(t) * b, b) = xs[t];
  }
  if (!trace.inputs.allFinite()) throw NumericError("non-finite activation entering " + cell.w_input->name);
  Tensor2 pre = trace.inputs * cell.w_input->value.transpose();
  pre.rowwise() += cell.bias->value.row(0);

  Tensor2 h = Tensor2::Zero(b, cell.hidden());
  Tensor2 c = Tensor2::Zero(b, cell.hidden());
  for (std::size_t k = 0; k < t_len; ++k) {
    const std::size_t t = reverse ? t_len - 1 - k : k;
    auto& cache = trace.steps[t];
    cell.step(pre.middleRows(static_cast<Eigen::Index>(t) * b, b), h, c, cache);
    h = cell.h_of(cache);
    c = cache.c;
    hs[t] = h;
  }
  return hs;
}

// dhs[t] is the gradient on the output at time t (may be empty = zero).
inline std::vector<Tensor2> run_lstm_backward(const LstmCell& cell, const LstmTrace& trace,
                                              const std::vector<Tensor2>& dhs) {
  const std::size_t t_len = trace.steps.size();
  std::vector<Tensor2> dxs(t_len);
  if (t_len == 0) return dxs;
  const Eigen::Index b = trace.steps.front().h_prev.rows();
  Tensor2 dgates(trace.inputs.rows(), 4 * cell.hidden());
  Tensor2 dh_next = Tensor2::Zero(b, cell.hidden());
  Tensor2 dc_next = Tensor2::Zero(b, cell.hidden());
  Tensor2 dh_prev, dc_prev;
  for (std::size_t k = 0; k < t_len; ++k) {
    const std::size_t t = trace.reverse ? k : t_len - 1 - k;
    Tensor2 dh = dh_next;
    if (t < dhs.size() && dhs[t].size() > 0) dh += dhs[t];
    dgates.middleRows(static_cast<Eigen::Index>(t) * b, b) =
        cell.step_backward(trace.steps[t], dh, dc_next, dh_prev, dc_prev);
    dh_next = std::move(dh_prev);
    dc_next = std::move(dc_prev);
  }
  cell.w_input->grad.noalias() += dgates.transpose() * trace.inputs;
  const Tensor2 dx = dgates * cell.w_input->value;
  for (std::size_t t = 0; t < t_len; ++t) dxs[t] = dx.middleRows(static_cast<Eigen::Index>(t) * b, b);
  return dxs;
}

// ---------------------------------------------------------------------------

struct StackedLstm {
  std::vector<LstmCell> layers;

  static StackedLstm create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden,
                            std::size_t depth) {
    StackedLstm s;
    for (std::size_t l = 0; l < depth; ++l)
      s.layers.push_back(LstmCell::create(store, name + ".l" + std::to_string(l), l == 0 ? in : hidden, hidden));
    return s;
  }

  void init(Rng& rng) const {
    for (const auto& l : layers) l.init(rng);
  }

  Eigen::Index hidden() const { return layers.back().hidden(); }

  struct Trace {
    std::vector<LstmTrace> layers;
  };

  // Top-layer hidden state at every step.
  std::vector<Tensor2> forward(const std::vector<Tensor2>& xs, Trace& trace) const {
    trace.layers.assign(layers.size(), {});
    std::vector<Tensor2> cur = xs;
    for (std::size_t l = 0; l < layers.size(); ++l) cur = run_lstm(layers[l], cur, false, trace.layers[l]);
    return cur;
  }

  std::vector<Tensor2> backward(const Trace& trace, const std::vector<Tensor2>& dhs) const {
    std::vector<Tensor2> cur = dhs;
    for (std::size_t l = layers.size(); l-- > 0;) cur = run_lstm_backward(layers[l], trace.layers[l], cur);
    return cur;
  }
};

// ---------------------------------------------------------------------------
// Bidirectional LSTM whose per-step states are pooled by learned attention:
// scores = ff2(relu(ff1(h_t))), weights = softmax over steps, pooled = sum_t u_t h_t.

struct BiLstmAttention {
  LstmCell forward_cell;
  LstmCell backward_cell;
  Linear att_hidden;
  Linear att_score;

  static BiLstmAttention create(ParamStore& store, const std::string& name, Eigen::Index in, Eigen::Index hidden,
                                Eigen::Index att_dim) {
    return {LstmCell::create(store, name + ".fwd", in, hidden), LstmCell::create(store, name + ".bwd", in, hidden),
            Linear::create(store, name + ".att1", 2 * hidden, att_dim),
            Linear::create(store, name + ".att2", att_dim, 1)};
  }

  void init(Rng& rng) const {
    forward_cell.init(rng);
    backward_cell.init(rng);
    att_hidden.init(rng);
    att_score.init(rng);
  }

  Eigen::Index out_dim() const { return 2 * forward_cell.hidden(); }

  struct Trace {
    LstmTrace fwd, bwd;
    std::vector<Tensor2> states;  // B x 2h per step
    std::vector<Tensor2> att;     // relu activations per step
    Tensor2 weights;              // B x T attention weights
  };

  Tensor2 forward(const std::vector<Tensor2>& xs, Trace& trace) const {
    if (xs.empty()) throw InputError("attention encoder needs a nonempty sequence");
    const auto hf = run_lstm(forward_cell, xs, false, trace.fwd);
    const auto hb = run_lstm(backward_cell, xs, true, trace.bwd);
    const std::size_t t_len = xs.size();
    const Eigen::Index b = xs.front().rows();
    trace.states.resize(t_len);
    trace.att.resize(t_len);
    Tensor2 scores(b, static_cast<Eigen::Index>(t_len));
    for (std::size_t t = 0; t < t_len; ++t) {
      trace.states[t] = concat(hf[t], hb[t]);
      trace.att[t] = relu(att_hidden.forward(trace.states[t]));
      scores.col(static_cast<Eigen::Index>(t)) = att_score.forward(trace.att[t]).col(0);
    }
    trace.weights = softmax(scores);
    Tensor2 pooled = Tensor2::Zero(b, out_dim());
    for (std::size_t t = 0; t < t_len; ++t)
      pooled += (trace.states[t].array().colwise() * trace.weights.col(static_cast<Eigen::Index>(t)).array()).matrix();
    return pooled;
  }

  std::vector<Tensor2> backward(const Trace& trace, const Tensor2& dpooled) const {
    const std::size_t t_len = trace.states.size();
    const Eigen::Index b = dpooled.rows();
    const Eigen::Index h = forward_cell.hidden();
    std::vector<Tensor2> dstates(t_len);
    Tensor2 dweights(b, static_cast<Eigen::Index>(t_len));
    for (std::size_t t = 0; t < t_len; ++t) {
      const auto col = static_cast<Eigen::Index>(t);
      dstates[t] = (dpooled.array().colwise() * trace.weights.col(col).array()).matrix();
      dweights.col(col) = (dpooled.array() * trace.states[t].array()).rowwise().sum().matrix();
    }
    const Tensor2 dscores = softmax_backward(trace.weights, dweights);
    std::vector<Tensor2> dhf(t_len), dhb(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
      const Tensor2 ds = dscores.col(static_cast<Eigen::Index>(t));
      const Tensor2 datt = relu_backward(trace.att[t], att_score.backward(trace.att[t], ds));
      dstates[t] += att_hidden.backward(trace.states[t], datt);
      dhf[t] = dstates[t].leftCols(h);
      dhb[t] = dstates[t].rightCols(h);
    }
    auto dxf = run_lstm_backward(forward_cell, trace.fwd, dhf);
    const auto dxb = run_lstm_backward(backward_cell, trace.bwd, dhb);
    for (std::size_t t = 0; t < t_len; ++t) dxf[t] += dxb[t];
    return dxf;
  }
};

}  // namespace cropnet::kernels
