#pragma once

// Minimal reverse-mode automatic differentiation over tensor-level ops.
//
// A Graph is a tape: each op evaluates eagerly, appends a node holding its
// value, and (in training mode) a closure that pushes the node's gradient to
// its inputs. backward() walks the tape in reverse. Parameter nodes alias the
// ParamStore entries, so gradients accumulate directly into the store.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "blindsr/core/error.hpp"
#include "blindsr/nn/tensor.hpp"

namespace blindsr::nn {

template <class T>
class Graph {
 public:
  struct Var {
    int id = -1;
  };

  enum class Mode { train, inference };

  explicit Graph(Mode mode = Mode::train) : record_(mode == Mode::train) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const noexcept { return record_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  Var constant(Tensor<T> v) { return push(std::move(v), false, {}); }

  Var param(ParamStore<T>& store, const std::string& name) {
    auto& e = store.entry(name);
    Node n;
    n.ext_value = &e.value;
    n.ext_grad = &e.grad;
    n.requires_grad = record_;
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  /// Read-only parameter view; never receives gradients.
  Var param(const ParamStore<T>& store, const std::string& name) {
    Node n;
    n.ext_value = &store.entry(name).value;
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<T>& value(Var v) const { return val(v.id); }

  /// Gradient of the last backward() target w.r.t. v (empty if unreached).
  const Tensor<T>& grad(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    return n.ext_grad ? *n.ext_grad : n.grad;
  }

  /// Copy of v cut off from the tape.
  Var detach(Var v) { return constant(val(v.id)); }

  // ---------------------------------------------------------------- ops

  /// 2-D convolution (cross-correlation). x [N,Ci,H,W], w [Co,Ci,k,k], b [Co].
  Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    const Tensor<T>& X = val(x.id);
    const Tensor<T>& Wt = val(w.id);
    if (X.rank() != 4 || Wt.rank() != 4 || Wt.dim(1) != X.dim(1) || Wt.dim(2) != Wt.dim(3)) {
      throw InvalidArgument("conv2d: incompatible input/weight shapes");
    }
    const ConvGeom g = geom(X, Wt, stride, pad);
    std::vector<T> col(static_cast<std::size_t>(g.K) * g.P);
    im2col(X.data.data(), g, col.data());

    CMap Wm(Wt.data.data(), g.Co, g.K);
    CMap Cm(col.data(), g.K, g.P);
    Mat Y(g.Co, g.P);
    Y.noalias() = Wm * Cm;

    Tensor<T> out({g.N, g.Co, g.Ho, g.Wo});
    const T* bias = val(b.id).data.data();
    const std::size_t q = static_cast<std::size_t>(g.Ho) * g.Wo;
    for (int n = 0; n < g.N; ++n) {
      for (int co = 0; co < g.Co; ++co) {
        T* dst = &out.data[(static_cast<std::size_t>(n) * g.Co + co) * q];
        const T* src = Y.data() + static_cast<std::size_t>(co) * g.P + n * q;
        for (std::size_t i = 0; i < q; ++i) dst[i] = src[i] + bias[co];
      }
    }
    return push(std::move(out), any_grad({x, w, b}), [x, w, b, g](Graph& G, const Tensor<T>& dout) {
      const std::size_t q = static_cast<std::size_t>(g.Ho) * g.Wo;
      Mat dY(g.Co, g.P);
      for (int n = 0; n < g.N; ++n) {
        for (int co = 0; co < g.Co; ++co) {
          const T* src = &dout.data[(static_cast<std::size_t>(n) * g.Co + co) * q];
          std::copy(src, src + q, dY.data() + static_cast<std::size_t>(co) * g.P + n * q);
        }
      }
      if (G.needs(b)) {
        Tensor<T>& db = G.grad_of(b.id);
        for (int co = 0; co < g.Co; ++co) db.data[static_cast<std::size_t>(co)] += dY.row(co).sum();
      }
      const bool need_w = G.needs(w), need_x = G.needs(x);
      if (!need_w && !need_x) return;
      std::vector<T> col(static_cast<std::size_t>(g.K) * g.P);
      if (need_w) {
        G.im2col(G.val(x.id).data.data(), g, col.data());
        Map dW(G.grad_of(w.id).data.data(), g.Co, g.K);
        dW.noalias() += dY * CMap(col.data(), g.K, g.P).transpose();
      }
      if (need_x) {
        Map dcol(col.data(), g.K, g.P);
        dcol.noalias() = CMap(G.val(w.id).data.data(), g.Co, g.K).transpose() * dY;
        col2im(col.data(), g, G.grad_of(x.id).data.data());
      }
    });
  }

  /// Group normalization over (C/G, H, W) per sample, with per-channel affine.
  Var group_norm(Var x, Var gamma, Var beta, int groups, double eps = 1e-5) {
    const Tensor<T>& X = val(x.id);
    if (X.rank() != 4) throw InvalidArgument("group_norm expects NCHW");
    const int N = X.dim(0), C = X.dim(1);
    if (groups <= 0 || C % groups != 0) throw InvalidArgument("group_norm: channels not divisible by groups");
    const std::size_t hw = static_cast<std::size_t>(X.dim(2)) * X.dim(3);
    const int cpg = C / groups;
    const std::size_t m = hw * cpg;
    std::vector<double> mean(static_cast<std::size_t>(N) * groups), rstd(mean.size());
    Tensor<T> out(X.shape);
    const T* ga = val(gamma.id).data.data();
    const T* be = val(beta.id).data.data();
    for (int n = 0; n < N; ++n) {
      for (int gi = 0; gi < groups; ++gi) {
        const std::size_t base = (static_cast<std::size_t>(n) * C + gi * cpg) * hw;
        double s = 0, ss = 0;
        for (std::size_t i = 0; i < m; ++i) s += X.data[base + i];
        const double mu = s / m;
        for (std::size_t i = 0; i < m; ++i) {
          const double d = X.data[base + i] - mu;
          ss += d * d;
        }
        const double r = 1.0 / std::sqrt(ss / m + eps);
        mean[static_cast<std::size_t>(n * groups + gi)] = mu;
        rstd[static_cast<std::size_t>(n * groups + gi)] = r;
        for (int c = 0; c < cpg; ++c) {
          const int ch = gi * cpg + c;
          for (std::size_t i = 0; i < hw; ++i) {
            const std::size_t k = base + c * hw + i;
            out.data[k] = static_cast<T>((X.data[k] - mu) * r * ga[ch] + be[ch]);
          }
        }
      }
    }
    return push(std::move(out), any_grad({x, gamma, beta}),
                [=, mean = std::move(mean), rstd = std::move(rstd)](Graph& G, const Tensor<T>& dy) {
                  const Tensor<T>& Xv = G.val(x.id);
                  const T* ga = G.val(gamma.id).data.data();
                  T* dga = G.needs(gamma) ? G.grad_of(gamma.id).data.data() : nullptr;
                  T* dbe = G.needs(beta) ? G.grad_of(beta.id).data.data() : nullptr;
                  T* dx = G.needs(x) ? G.grad_of(x.id).data.data() : nullptr;
                  for (int n = 0; n < N; ++n) {
                    for (int gi = 0; gi < groups; ++gi) {
                      const std::size_t base = (static_cast<std::size_t>(n) * C + gi * cpg) * hw;
                      const double mu = mean[static_cast<std::size_t>(n * groups + gi)];
                      const double r = rstd[static_cast<std::size_t>(n * groups + gi)];
                      double s1 = 0, s2 = 0;
                      for (int c = 0; c < cpg; ++c) {
                        const int ch = gi * cpg + c;
                        double dg = 0, db = 0;
                        for (std::size_t i = 0; i < hw; ++i) {
                          const std::size_t k = base + c * hw + i;
                          const double xh = (Xv.data[k] - mu) * r;
                          const double g = dy.data[k];
                          dg += g * xh;
                          db += g;
                          const double dxh = g * ga[ch];
                          s1 += dxh;
                          s2 += dxh * xh;
                        }
                        if (dga) dga[ch] += static_cast<T>(dg);
                        if (dbe) dbe[ch] += static_cast<T>(db);
                      }
                      if (!dx) continue;
                      const double inv_m = 1.0 / static_cast<double>(m);
                      for (int c = 0; c < cpg; ++c) {
                        const int ch = gi * cpg + c;
                        for (std::size_t i = 0; i < hw; ++i) {
                          const std::size_t k = base + c * hw + i;
                          const double xh = (Xv.data[k] - mu) * r;
                          const double dxh = dy.data[k] * ga[ch];
                          dx[k] += static_cast<T>(r * (dxh - s1 * inv_m - xh * s2 * inv_m));
                        }
                      }
                    }
                  }
                });
  }

  /// x * sigmoid(x), elementwise.
  Var silu(Var x) {
    const Tensor<T>& X = val(x.id);
    Tensor<T> out(X.shape);
    for (std::size_t i = 0; i < X.size(); ++i) out.data[i] = X.data[i] * sigmoid(X.data[i]);
    return push(std::move(out), any_grad({x}), [x](Graph& G, const Tensor<T>& dy) {
      const Tensor<T>& Xv = G.val(x.id);
      T* dx = G.grad_of(x.id).data.data();
      for (std::size_t i = 0; i < Xv.size(); ++i) {
        const T s = sigmoid(Xv.data[i]);
        dx[i] += dy.data[i] * s * (T(1) + Xv.data[i] * (T(1) - s));
      }
    });
  }

  Var add(Var a, Var b) {
    const Tensor<T>& A = val(a.id);
    const Tensor<T>& B = val(b.id);
    if (A.shape != B.shape) throw InvalidArgument("add: shape mismatch");
    Tensor<T> out(A.shape);
    for (std::size_t i = 0; i < A.size(); ++i) out.data[i] = A.data[i] + B.data[i];
    return push(std::move(out), any_grad({a, b}), [a, b](Graph& G, const Tensor<T>& dy) {
      for (Var v : {a, b}) {
        if (!G.needs(v)) continue;
        T* d = G.grad_of(v.id).data.data();
        for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy.data[i];
      }
    });
  }

  Var scale(Var x, T s) {
    const Tensor<T>& X = val(x.id);
    Tensor<T> out(X.shape);
    for (std::size_t i = 0; i < X.size(); ++i) out.data[i] = X.data[i] * s;
    return push(std::move(out), any_grad({x}), [x, s](Graph& G, const Tensor<T>& dy) {
      T* d = G.grad_of(x.id).data.data();
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy.data[i] * s;
    });
  }

  /// x [N,C,H,W] + e [N,C] broadcast over H, W.
  Var add_channel_bias(Var x, Var e) {
    const Tensor<T>& X = val(x.id);
    const Tensor<T>& E = val(e.id);
    if (X.rank() != 4 || E.rank() != 2 || E.dim(0) != X.dim(0) || E.dim(1) != X.dim(1)) {
      throw InvalidArgument("add_channel_bias: shape mismatch");
    }
    const std::size_t hw = static_cast<std::size_t>(X.dim(2)) * X.dim(3);
    const std::size_t nc = static_cast<std::size_t>(X.dim(0)) * X.dim(1);
    Tensor<T> out(X.shape);
    for (std::size_t k = 0; k < nc; ++k) {
      for (std::size_t i = 0; i < hw; ++i) out.data[k * hw + i] = X.data[k * hw + i] + E.data[k];
    }
    return push(std::move(out), any_grad({x, e}), [x, e, hw, nc](Graph& G, const Tensor<T>& dy) {
      if (G.needs(x)) {
        T* d = G.grad_of(x.id).data.data();
        for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy.data[i];
      }
      if (G.needs(e)) {
        T* d = G.grad_of(e.id).data.data();
        for (std::size_t k = 0; k < nc; ++k) {
          T s = 0;
          for (std::size_t i = 0; i < hw; ++i) s += dy.data[k * hw + i];
          d[k] += s;
        }
      }
    });
  }

  /// x [N,C,H,W] scaled by s [N,C] broadcast over H, W.
  Var mul_channel_scale(Var x, Var s) {
    const Tensor<T>& X = val(x.id);
    const Tensor<T>& S = val(s.id);
    if (X.rank() != 4 || S.rank() != 2 || S.dim(0) != X.dim(0) || S.dim(1) != X.dim(1)) {
      throw InvalidArgument("mul_channel_scale: shape mismatch");
    }
    const std::size_t hw = static_cast<std::size_t>(X.dim(2)) * X.dim(3);
    const std::size_t nc = static_cast<std::size_t>(X.dim(0)) * X.dim(1);
    Tensor<T> out(X.shape);
    for (std::size_t k = 0; k < nc; ++k) {
      for (std::size_t i = 0; i < hw; ++i) out.data[k * hw + i] = X.data[k * hw + i] * S.data[k];
    }
    return push(std::move(out), any_grad({x, s}), [x, s, hw, nc](Graph& G, const Tensor<T>& dy) {
      const Tensor<T>& Xv = G.val(x.id);
      const Tensor<T>& Sv = G.val(s.id);
      if (G.needs(x)) {
        T* d = G.grad_of(x.id).data.data();
        for (std::size_t k = 0; k < nc; ++k) {
          for (std::size_t i = 0; i < hw; ++i) d[k * hw + i] += dy.data[k * hw + i] * Sv.data[k];
        }
      }
      if (G.needs(s)) {
        T* d = G.grad_of(s.id).data.data();
        for (std::size_t k = 0; k < nc; ++k) {
          T acc = 0;
          for (std::size_t i = 0; i < hw; ++i) acc += dy.data[k * hw + i] * Xv.data[k * hw + i];
          d[k] += acc;
        }
      }
    });
  }

  /// Channels [start, start + count) of an NCHW tensor.
  Var slice_channels(Var x, int start, int count) {
    const Tensor<T>& X = val(x.id);
    if (X.rank() != 4 || start < 0 || count <= 0 || start + count > X.dim(1)) {
      throw InvalidArgument("slice_channels: bad range");
    }
    const int N = X.dim(0), C = X.dim(1);
    const std::size_t hw = static_cast<std::size_t>(X.dim(2)) * X.dim(3);
    Tensor<T> out({N, count, X.dim(2), X.dim(3)});
    for (int n = 0; n < N; ++n) {
      std::copy_n(&X.data[(static_cast<std::size_t>(n) * C + start) * hw], count * hw,
                  &out.data[static_cast<std::size_t>(n) * count * hw]);
    }
    return push(std::move(out), any_grad({x}), [x, N, C, start, count, hw](Graph& G, const Tensor<T>& dy) {
      for (int n = 0; n < N; ++n) {
        T* d = &G.grad_of(x.id).data[(static_cast<std::size_t>(n) * C + start) * hw];
        const T* src = &dy.data[static_cast<std::size_t>(n) * count * hw];
        for (std::size_t i = 0; i < count * hw; ++i) d[i] += src[i];
      }
    });
  }

  /// Fully connected: x [N,I], w [O,I], b [O] -> [N,O].
  Var linear(Var x, Var w, Var b) {
    const Tensor<T>& X = val(x.id);
    const Tensor<T>& Wt = val(w.id);
    if (X.rank() != 2 || Wt.rank() != 2 || Wt.dim(1) != X.dim(1)) throw InvalidArgument("linear: shape mismatch");
    const int N = X.dim(0), I = X.dim(1), O = Wt.dim(0);
    Tensor<T> out({N, O});
    Map Y(out.data.data(), N, O);
    Y.noalias() = CMap(X.data.data(), N, I) * CMap(Wt.data.data(), O, I).transpose();
    const T* bias = val(b.id).data.data();
    for (int n = 0; n < N; ++n) {
      for (int o = 0; o < O; ++o) Y(n, o) += bias[o];
    }
    return push(std::move(out), any_grad({x, w, b}), [x, w, b, N, I, O](Graph& G, const Tensor<T>& dy) {
      CMap dY(dy.data.data(), N, O);
      if (G.needs(w)) {
        Map dW(G.grad_of(w.id).data.data(), O, I);
        dW.noalias() += dY.transpose() * CMap(G.val(x.id).data.data(), N, I);
      }
      if (G.needs(b)) {
        T* db = G.grad_of(b.id).data.data();
        for (int o = 0; o < O; ++o) db[o] += dY.col(o).sum();
      }
      if (G.needs(x)) {
        Map dX(G.grad_of(x.id).data.data(), N, I);
        dX.noalias() += dY * CMap(G.val(w.id).data.data(), O, I);
      }
    });
  }

  /// Channel concatenation of two NCHW tensors with equal N, H, W.
  Var concat_channels(Var a, Var b) {
    const Tensor<T>& A = val(a.id);
    const Tensor<T>& B = val(b.id);
    if (A.rank() != 4 || B.rank() != 4 || A.dim(0) != B.dim(0) || A.dim(2) != B.dim(2) || A.dim(3) != B.dim(3)) {
      throw InvalidArgument("concat_channels: shape mismatch");
    }
    const int N = A.dim(0), Ca = A.dim(1), Cb = B.dim(1);
    const std::size_t hw = static_cast<std::size_t>(A.dim(2)) * A.dim(3);
    Tensor<T> out({N, Ca + Cb, A.dim(2), A.dim(3)});
    for (int n = 0; n < N; ++n) {
      std::copy_n(&A.data[n * Ca * hw], Ca * hw, &out.data[n * (Ca + Cb) * hw]);
      std::copy_n(&B.data[n * Cb * hw], Cb * hw, &out.data[(n * (Ca + Cb) + Ca) * hw]);
    }
    return push(std::move(out), any_grad({a, b}), [a, b, N, Ca, Cb, hw](Graph& G, const Tensor<T>& dy) {
      for (int n = 0; n < N; ++n) {
        if (G.needs(a)) {
          T* d = &G.grad_of(a.id).data[n * Ca * hw];
          const T* s = &dy.data[n * (Ca + Cb) * hw];
          for (std::size_t i = 0; i < Ca * hw; ++i) d[i] += s[i];
        }
        if (G.needs(b)) {
          T* d = &G.grad_of(b.id).data[n * Cb * hw];
          const T* s = &dy.data[(n * (Ca + Cb) + Ca) * hw];
          for (std::size_t i = 0; i < Cb * hw; ++i) d[i] += s[i];
        }
      }
    });
  }

  /// Nearest-neighbour 2x upsampling of NCHW.
  Var upsample2(Var x) {
    const Tensor<T>& X = val(x.id);
    if (X.rank() != 4) throw InvalidArgument("upsample2 expects NCHW");
    const int nc = X.dim(0) * X.dim(1), H = X.dim(2), W = X.dim(3);
    Tensor<T> out({X.dim(0), X.dim(1), 2 * H, 2 * W});
    for (int k = 0; k < nc; ++k) {
      for (int y = 0; y < 2 * H; ++y) {
        const T* src = &X.data[(static_cast<std::size_t>(k) * H + y / 2) * W];
        T* dst = &out.data[(static_cast<std::size_t>(k) * 2 * H + y) * 2 * W];
        for (int xx = 0; xx < 2 * W; ++xx) dst[xx] = src[xx / 2];
      }
    }
    return push(std::move(out), any_grad({x}), [x, nc, H, W](Graph& G, const Tensor<T>& dy) {
      T* dx = G.grad_of(x.id).data.data();
      for (int k = 0; k < nc; ++k) {
        for (int y = 0; y < 2 * H; ++y) {
          const T* src = &dy.data[(static_cast<std::size_t>(k) * 2 * H + y) * 2 * W];
          T* dst = &dx[(static_cast<std::size_t>(k) * H + y / 2) * W];
          for (int xx = 0; xx < 2 * W; ++xx) dst[xx / 2] += src[xx];
        }
      }
    });
  }

  /// Mean squared error against a fixed target; returns a scalar node.
  Var mse(Var pred, const Tensor<T>& target) {
    const Tensor<T>& P = val(pred.id);
    if (P.shape != target.shape) throw InvalidArgument("mse: shape mismatch");
    double s = 0;
    for (std::size_t i = 0; i < P.size(); ++i) {
      const double d = static_cast<double>(P.data[i]) - target.data[i];
      s += d * d;
    }
    Tensor<T> out({1}, static_cast<T>(s / static_cast<double>(P.size())));
    return push(std::move(out), any_grad({pred}), [pred, target](Graph& G, const Tensor<T>& dy) {
      const Tensor<T>& Pv = G.val(pred.id);
      T* d = G.grad_of(pred.id).data.data();
      const T k = dy.data[0] * T(2) / static_cast<T>(Pv.size());
      for (std::size_t i = 0; i < Pv.size(); ++i) d[i] += k * (Pv.data[i] - target.data[i]);
    });
  }

  /// Reverse sweep from a scalar node. Gradients accumulate into parameter
  /// stores; callers zero them between steps.
  void backward(Var loss) {
    if (!record_) throw InvalidArgument("backward() on an inference graph");
    if (val(loss.id).size() != 1) throw InvalidArgument("backward() needs a scalar loss");
    if (!nodes_[static_cast<std::size_t>(loss.id)].requires_grad) return;
    grad_of(loss.id).data[0] += T(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.backward || n.grad.empty()) continue;
      auto fn = std::move(n.backward);
      fn(*this, n.grad);
      // Free intermediate buffers as soon as they have been consumed.
      nodes_[static_cast<std::size_t>(id)].grad = Tensor<T>();
    }
  }

 private:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<Mat>;
  using CMap = Eigen::Map<const Mat>;
  using Backward = std::function<void(Graph&, const Tensor<T>&)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    const Tensor<T>* ext_value = nullptr;
    Tensor<T>* ext_grad = nullptr;
    bool requires_grad = false;
    Backward backward;
  };

  struct ConvGeom {
    int N, Ci, H, W, Co, k, stride, pad, Ho, Wo, K, P;
  };

  static T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
  }

  static ConvGeom geom(const Tensor<T>& X, const Tensor<T>& Wt, int stride, int pad) {
    ConvGeom g{};
    g.N = X.dim(0);
    g.Ci = X.dim(1);
    g.H = X.dim(2);
    g.W = X.dim(3);
    g.Co = Wt.dim(0);
    g.k = Wt.dim(2);
    g.stride = stride;
    g.pad = pad;
    g.Ho = (g.H + 2 * pad - g.k) / stride + 1;
    g.Wo = (g.W + 2 * pad - g.k) / stride + 1;
    if (g.Ho <= 0 || g.Wo <= 0) throw InvalidArgument("conv2d: input smaller than kernel");
    g.K = g.Ci * g.k * g.k;
    g.P = g.N * g.Ho * g.Wo;
    return g;
  }

  static void im2col(const T* x, const ConvGeom& g, T* col) {
    for (int c = 0; c < g.Ci; ++c) {
      for (int ky = 0; ky < g.k; ++ky) {
        for (int kx = 0; kx < g.k; ++kx) {
          T* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.P;
          for (int n = 0; n < g.N; ++n) {
            const T* plane = x + (static_cast<std::size_t>(n) * g.Ci + c) * g.H * g.W;
            for (int oy = 0; oy < g.Ho; ++oy) {
              T* dst = row + (static_cast<std::size_t>(n) * g.Ho + oy) * g.Wo;
              const int iy = oy * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.H) {
                std::fill(dst, dst + g.Wo, T(0));
                continue;
              }
              const T* src = plane + static_cast<std::size_t>(iy) * g.W;
              for (int ox = 0; ox < g.Wo; ++ox) {
                const int ix = ox * g.stride - g.pad + kx;
                dst[ox] = (ix >= 0 && ix < g.W) ? src[ix] : T(0);
              }
            }
          }
        }
      }
    }
  }

  static void col2im(const T* col, const ConvGeom& g, T* dx) {
    for (int c = 0; c < g.Ci; ++c) {
      for (int ky = 0; ky < g.k; ++ky) {
        for (int kx = 0; kx < g.k; ++kx) {
          const T* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * g.P;
          for (int n = 0; n < g.N; ++n) {
            T* plane = dx + (static_cast<std::size_t>(n) * g.Ci + c) * g.H * g.W;
            for (int oy = 0; oy < g.Ho; ++oy) {
              const int iy = oy * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.H) continue;
              const T* src = row + (static_cast<std::size_t>(n) * g.Ho + oy) * g.Wo;
              T* dst = plane + static_cast<std::size_t>(iy) * g.W;
              for (int ox = 0; ox < g.Wo; ++ox) {
                const int ix = ox * g.stride - g.pad + kx;
                if (ix >= 0 && ix < g.W) dst[ix] += src[ox];
              }
            }
          }
        }
      }
    }
  }

  const Tensor<T>& val(int id) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(id));
    return n.ext_value ? *n.ext_value : n.value;
  }

  bool needs(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

  bool any_grad(std::initializer_list<Var> vs) const {
    if (!record_) return false;
    for (Var v : vs) {
      if (needs(v)) return true;
    }
    return false;
  }

  Tensor<T>& grad_of(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.ext_grad) return *n.ext_grad;
    if (n.grad.empty()) n.grad = Tensor<T>(val(id).shape);
    return n.grad;
  }

  Var push(Tensor<T> value, bool requires_grad, Backward bw) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
  }

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace blindsr::nn
