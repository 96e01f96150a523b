#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "confctrl/kernels.hpp"

// Minimal reverse-mode autodiff over dense tensors. The graph is a DAG of
// shared nodes rebuilt per step; parameters are long-lived leaf nodes whose
// grad buffers are read by the optimizer after backward().

namespace confctrl::ad {

template <typename T>
struct Node {
  std::vector<int> shape;
  std::vector<T> val;
  std::vector<T> grad;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backfn;
  bool requires_grad = false;

  size_t numel() const { return val.size(); }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape) {
    auto n = std::make_shared<Node<T>>();
    size_t sz = 1;
    for (int d : shape) sz *= size_t(d);
    n->shape = std::move(shape);
    n->val.assign(sz, T(0));
    return Tensor(n);
  }
  static Tensor from(std::vector<int> shape, std::vector<T> data) {
    Tensor t = zeros(std::move(shape));
    if (t.numel() != data.size()) throw std::invalid_argument("tensor: data size mismatch");
    t.n_->val = std::move(data);
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  int dim(int i) const { return n_->shape[i]; }
  size_t numel() const { return n_->val.size(); }
  std::vector<T>& val() { return n_->val; }
  const std::vector<T>& val() const { return n_->val; }
  std::vector<T>& grad() { return n_->grad; }
  const std::vector<T>& grad() const { return n_->grad; }
  std::shared_ptr<Node<T>> node() const { return n_; }
  void set_requires_grad(bool b = true) { n_->requires_grad = b; }

  int rows() const { return n_->shape[0]; }
  int cols() const { return n_->shape[1]; }

 private:
  std::shared_ptr<Node<T>> n_;
};

namespace detail {

template <typename T>
Tensor<T> make_op(std::vector<int> shape, std::vector<std::shared_ptr<Node<T>>> parents,
                  std::function<void(Node<T>&)> backfn) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  t.node()->parents = std::move(parents);
  t.node()->backfn = std::move(backfn);
  return t;
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace detail

// ---- elementwise ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  auto out = detail::make_op<T>(a.shape(), {a.node(), b.node()}, [](Node<T>& n) {
    for (size_t i = 0; i < n.numel(); ++i) {
      n.parents[0]->grad[i] += n.grad[i];
      n.parents[1]->grad[i] += n.grad[i];
    }
  });
  for (size_t i = 0; i < out.numel(); ++i) out.val()[i] = a.val()[i] + b.val()[i];
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  auto out = detail::make_op<T>(a.shape(), {a.node(), b.node()}, [](Node<T>& n) {
    for (size_t i = 0; i < n.numel(); ++i) {
      n.parents[0]->grad[i] += n.grad[i];
      n.parents[1]->grad[i] -= n.grad[i];
    }
  });
  for (size_t i = 0; i < out.numel(); ++i) out.val()[i] = a.val()[i] - b.val()[i];
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  auto out = detail::make_op<T>(a.shape(), {a.node(), b.node()}, [](Node<T>& n) {
    for (size_t i = 0; i < n.numel(); ++i) {
      n.parents[0]->grad[i] += n.grad[i] * n.parents[1]->val[i];
      n.parents[1]->grad[i] += n.grad[i] * n.parents[0]->val[i];
    }
  });
  for (size_t i = 0; i < out.numel(); ++i) out.val()[i] = a.val()[i] * b.val()[i];
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  auto out = detail::make_op<T>(a.shape(), {a.node()}, [c](Node<T>& n) {
    for (size_t i = 0; i < n.numel(); ++i) n.parents[0]->grad[i] += c * n.grad[i];
  });
  for (size_t i = 0; i < out.numel(); ++i) out.val()[i] = c * a.val()[i];
  return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  auto out = detail::make_op<T>(a.shape(), {a.node()}, [](Node<T>& n) {
    for (size_t i = 0; i < n.numel(); ++i) n.parents[0]->grad[i] += n.grad[i];
  });
  for (size_t i = 0; i < out.numel(); ++i) out.val()[i] = a.val()[i] + c;
  return out;
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return mul(a, a);
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  auto out = detail::make_op<T>(a.shape(), {a.node()}, [](Node<T>& n) {
    for (size_t i = 0; i < n.numel(); ++i) {
      const T x = n.parents[0]->val[i];
      n.parents[0]->grad[i] += n.grad[i] * (x > 0 ? T(1) : (x < 0 ? T(-1) : T(0)));
    }
  });
  for (size_t i = 0; i < out.numel(); ++i) out.val()[i] = std::abs(a.val()[i]);
  return out;
}

template <typename T>
Tensor<T> silu(const Tensor<T>& a) {
  auto out = detail::make_op<T>(a.shape(), {a.node()}, [](Node<T>& n) {
    for (size_t i = 0; i < n.numel(); ++i) {
      const T x = n.parents[0]->val[i];
      const T s = T(1) / (T(1) + std::exp(-x));
      n.parents[0]->grad[i] += n.grad[i] * s * (T(1) + x * (T(1) - s));
    }
  });
  for (size_t i = 0; i < out.numel(); ++i) {
    const T x = a.val()[i];
    out.val()[i] = x / (T(1) + std::exp(-x));
  }
  return out;
}

// ---- row broadcasts: X is [N,D], v has D elements ----

template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& v) {
  const int nrow = x.rows(), ncol = x.cols();
  if (int(v.numel()) != ncol) throw std::invalid_argument("add_row: width mismatch");
  auto out = detail::make_op<T>(x.shape(), {x.node(), v.node()}, [nrow, ncol](Node<T>& n) {
    for (int r = 0; r < nrow; ++r)
      for (int c = 0; c < ncol; ++c) {
        const T g = n.grad[size_t(r) * ncol + c];
        n.parents[0]->grad[size_t(r) * ncol + c] += g;
        n.parents[1]->grad[c] += g;
      }
  });
  for (int r = 0; r < nrow; ++r)
    for (int c = 0; c < ncol; ++c)
      out.val()[size_t(r) * ncol + c] = x.val()[size_t(r) * ncol + c] + v.val()[c];
  return out;
}

template <typename T>
Tensor<T> mul_row(const Tensor<T>& x, const Tensor<T>& v) {
  const int nrow = x.rows(), ncol = x.cols();
  if (int(v.numel()) != ncol) throw std::invalid_argument("mul_row: width mismatch");
  auto out = detail::make_op<T>(x.shape(), {x.node(), v.node()}, [nrow, ncol](Node<T>& n) {
    for (int r = 0; r < nrow; ++r)
      for (int c = 0; c < ncol; ++c) {
        const size_t i = size_t(r) * ncol + c;
        n.parents[0]->grad[i] += n.grad[i] * n.parents[1]->val[c];
        n.parents[1]->grad[c] += n.grad[i] * n.parents[0]->val[i];
      }
  });
  for (int r = 0; r < nrow; ++r)
    for (int c = 0; c < ncol; ++c) {
      const size_t i = size_t(r) * ncol + c;
      out.val()[i] = x.val()[i] * v.val()[c];
    }
  return out;
}

// ---- matmul ----

// out = alpha * op(A) op(B). By the time a node's backfn runs its grad is
// fully accumulated and never read again, so the alpha != 1 case may fold the
// factor into n.grad in place instead of allocating a scaled copy.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool transA = false,
                 bool transB = false, T alpha = T(1)) {
  const int M = transA ? a.cols() : a.rows();
  const int K = transA ? a.rows() : a.cols();
  const int Kb = transB ? b.cols() : b.rows();
  const int N = transB ? b.rows() : b.cols();
  if (K != Kb) throw std::invalid_argument("matmul: inner dimension mismatch");
  auto out = detail::make_op<T>({M, N}, {a.node(), b.node()},
                                [M, N, K, transA, transB, alpha](Node<T>& n) {
    if (alpha != T(1))
      for (auto& g : n.grad) g *= alpha;
    const T* A = n.parents[0]->val.data();
    const T* B = n.parents[1]->val.data();
    const T* dC = n.grad.data();
    T* gA = n.parents[0]->grad.data();
    T* gB = n.parents[1]->grad.data();
    if (!transA)
      kern::gemm_acc<T>(false, !transB, M, K, N, dC, B, gA);
    else
      kern::gemm_acc<T>(transB, true, K, M, N, B, dC, gA);
    if (!transB)
      kern::gemm_acc<T>(!transA, false, K, N, M, A, dC, gB);
    else
      kern::gemm_acc<T>(true, transA, N, K, M, dC, A, gB);
  });
  kern::gemm<T>(transA, transB, M, N, K, a.val().data(), b.val().data(), out.val().data());
  if (alpha != T(1))
    for (auto& v : out.val()) v *= alpha;
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  return add_row(matmul(x, w), b);
}

// Fused scaled-dot-product attention for one head:
//   out = softmax(alpha * q k^T) v
// Equivalent to matmul(softmax_rows(matmul(q, k, false, true, alpha)), v) but
// keeps a single M x M probability buffer instead of two full graph nodes,
// which dominates memory traffic when M >> head width.
template <typename T>
Tensor<T> attend(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, T alpha) {
  const int M = q.rows(), dh = q.cols(), Mk = k.rows();
  if (k.cols() != dh || v.rows() != Mk) throw std::invalid_argument("attend: shape mismatch");
  const int dv = v.cols();
  auto probs = std::make_shared<std::vector<T>>(size_t(M) * Mk);
  auto out = detail::make_op<T>({M, dv}, {q.node(), k.node(), v.node()},
                                [M, Mk, dh, dv, alpha, probs](Node<T>& n) {
    const T* P = probs->data();
    // dV += P^T dOut
    kern::gemm_acc<T>(true, false, Mk, dv, M, P, n.grad.data(), n.parents[2]->grad.data());
    // dP = dOut V^T, then softmax backward in place, then fold in alpha
    std::vector<T> dP(size_t(M) * Mk);
    kern::gemm<T>(false, true, M, Mk, dv, n.grad.data(), n.parents[2]->val.data(), dP.data());
    for (int r = 0; r < M; ++r) {
      const T* y = P + size_t(r) * Mk;
      T* dy = dP.data() + size_t(r) * Mk;
      T dot = 0;
      for (int c = 0; c < Mk; ++c) dot += dy[c] * y[c];
      for (int c = 0; c < Mk; ++c) dy[c] = alpha * y[c] * (dy[c] - dot);
    }
    // dQ += dS K, dK += dS^T Q
    kern::gemm_acc<T>(false, false, M, dh, Mk, dP.data(), n.parents[1]->val.data(),
                      n.parents[0]->grad.data());
    kern::gemm_acc<T>(true, false, Mk, dh, M, dP.data(), n.parents[0]->val.data(),
                      n.parents[1]->grad.data());
  });
  kern::gemm<T>(false, true, M, Mk, dh, q.val().data(), k.val().data(), probs->data());
  if (alpha != T(1))
    for (auto& s : *probs) s *= alpha;
  kern::softmax_rows<T>(probs->data(), M, Mk);
  kern::gemm<T>(false, false, M, dv, Mk, probs->data(), v.val().data(), out.val().data());
  return out;
}

// ---- normalization / attention pieces ----

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  const int nrow = x.rows(), ncol = x.cols();
  // backward reads the node's own forward output (n.val)
  auto out = detail::make_op<T>(x.shape(), {x.node()}, [nrow, ncol](Node<T>& n) {
    for (int r = 0; r < nrow; ++r) {
      const T* y = n.val.data() + size_t(r) * ncol;
      const T* dy = n.grad.data() + size_t(r) * ncol;
      T dot = 0;
      for (int c = 0; c < ncol; ++c) dot += dy[c] * y[c];
      T* dx = n.parents[0]->grad.data() + size_t(r) * ncol;
      for (int c = 0; c < ncol; ++c) dx[c] += y[c] * (dy[c] - dot);
    }
  });
  out.val() = x.val();
  kern::softmax_rows<T>(out.val().data(), nrow, ncol);
  return out;
}

template <typename T>
Tensor<T> layernorm_rows(const Tensor<T>& x, T eps = T(1e-5)) {
  const int nrow = x.rows(), ncol = x.cols();
  auto stats = std::make_shared<std::vector<T>>(size_t(nrow) * 2);  // mu, inv_sigma
  auto out = detail::make_op<T>(x.shape(), {x.node()}, [nrow, ncol, stats](Node<T>& n) {
    for (int r = 0; r < nrow; ++r) {
      const T mu = (*stats)[size_t(r) * 2];
      const T inv = (*stats)[size_t(r) * 2 + 1];
      const T* xv = n.parents[0]->val.data() + size_t(r) * ncol;
      const T* dy = n.grad.data() + size_t(r) * ncol;
      T mean_dy = 0, mean_dyy = 0;
      for (int c = 0; c < ncol; ++c) {
        const T y = (xv[c] - mu) * inv;
        mean_dy += dy[c];
        mean_dyy += dy[c] * y;
      }
      mean_dy /= ncol;
      mean_dyy /= ncol;
      T* dx = n.parents[0]->grad.data() + size_t(r) * ncol;
      for (int c = 0; c < ncol; ++c) {
        const T y = (xv[c] - mu) * inv;
        dx[c] += inv * (dy[c] - mean_dy - y * mean_dyy);
      }
    }
  });
  for (int r = 0; r < nrow; ++r) {
    const T* xv = x.val().data() + size_t(r) * ncol;
    T mu = 0;
    for (int c = 0; c < ncol; ++c) mu += xv[c];
    mu /= ncol;
    T var = 0;
    for (int c = 0; c < ncol; ++c) var += (xv[c] - mu) * (xv[c] - mu);
    var /= ncol;
    const T inv = T(1) / std::sqrt(var + eps);
    (*stats)[size_t(r) * 2] = mu;
    (*stats)[size_t(r) * 2 + 1] = inv;
    T* y = out.val().data() + size_t(r) * ncol;
    for (int c = 0; c < ncol; ++c) y[c] = (xv[c] - mu) * inv;
  }
  return out;
}

// ---- shape ops ----

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<int> shape) {
  size_t sz = 1;
  for (int d : shape) sz *= size_t(d);
  if (sz != x.numel()) throw std::invalid_argument("reshape: numel mismatch");
  auto out = detail::make_op<T>(std::move(shape), {x.node()}, [](Node<T>& n) {
    for (size_t i = 0; i < n.numel(); ++i) n.parents[0]->grad[i] += n.grad[i];
  });
  out.val() = x.val();
  return out;
}

// out[i] = x.flat[idx[i]]; backward scatter-adds. idx entries must be valid.
template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::shared_ptr<std::vector<int64_t>> idx,
                 std::vector<int> out_shape) {
  auto out = detail::make_op<T>(std::move(out_shape), {x.node()}, [idx](Node<T>& n) {
    for (size_t i = 0; i < n.numel(); ++i) n.parents[0]->grad[(*idx)[i]] += n.grad[i];
  });
  if (out.numel() != idx->size()) throw std::invalid_argument("gather: index size mismatch");
  for (size_t i = 0; i < out.numel(); ++i) out.val()[i] = x.val()[(*idx)[i]];
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, int c0, int width) {
  const int nrow = x.rows(), ncol = x.cols();
  if (c0 < 0 || c0 + width > ncol) throw std::invalid_argument("slice_cols: out of range");
  auto out = detail::make_op<T>({nrow, width}, {x.node()}, [nrow, ncol, c0, width](Node<T>& n) {
    for (int r = 0; r < nrow; ++r) {
      const T* dy = n.grad.data() + size_t(r) * width;
      T* dx = n.parents[0]->grad.data() + size_t(r) * ncol + c0;
      for (int c = 0; c < width; ++c) dx[c] += dy[c];
    }
  });
  for (int r = 0; r < nrow; ++r) {
    const T* src = x.val().data() + size_t(r) * ncol + c0;
    T* dst = out.val().data() + size_t(r) * width;
    for (int c = 0; c < width; ++c) dst[c] = src[c];
  }
  return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  const int nrow = parts.at(0).rows();
  int ncol = 0;
  for (const auto& p : parts) ncol += p.cols();
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::vector<int> widths;
  for (const auto& p : parts) {
    if (p.rows() != nrow) throw std::invalid_argument("concat_cols: row mismatch");
    parents.push_back(p.node());
    widths.push_back(p.cols());
  }
  auto out = detail::make_op<T>({nrow, ncol}, parents, [nrow, ncol, widths](Node<T>& n) {
    int c0 = 0;
    for (size_t pi = 0; pi < widths.size(); ++pi) {
      const int w = widths[pi];
      for (int r = 0; r < nrow; ++r)
        for (int c = 0; c < w; ++c)
          n.parents[pi]->grad[size_t(r) * w + c] += n.grad[size_t(r) * ncol + c0 + c];
      c0 += w;
    }
  });
  int c0 = 0;
  for (const auto& p : parts) {
    const int w = p.cols();
    for (int r = 0; r < nrow; ++r)
      for (int c = 0; c < w; ++c)
        out.val()[size_t(r) * ncol + c0 + c] = p.val()[size_t(r) * w + c];
    c0 += w;
  }
  return out;
}

// ---- reductions ----

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  const size_t n_el = x.numel();
  auto out = detail::make_op<T>({1}, {x.node()}, [n_el](Node<T>& n) {
    const T g = n.grad[0] / T(n_el);
    for (size_t i = 0; i < n_el; ++i) n.parents[0]->grad[i] += g;
  });
  T s = 0;
  for (size_t i = 0; i < n_el; ++i) s += x.val()[i];
  out.val()[0] = s / T(n_el);
  return out;
}

// ---- backward ----

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
  std::vector<Node<T>*> topo;
  std::unordered_set<Node<T>*> seen;
  // iterative post-order DFS
  std::vector<std::pair<Node<T>*, size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  for (Node<T>* n : topo) n->grad.assign(n->numel(), T(0));
  loss.node()->grad[0] = T(1);
  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backfn) (*it)->backfn(**it);
}

}  // namespace confctrl::ad
