#include "kseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace kseg {

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor extent must be positive");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a->shape != b->shape) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    shape_str(a->shape) + " vs " + shape_str(b->shape));
    }
}

bool is_scalar(const Tensor& t) { return t->numel() == 1; }

}  // namespace

void TensorData::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void TensorData::zero_grad() { grad.assign(values.size(), 0.0); }

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor make_tensor(std::vector<int> shape, bool requires_grad) {
    auto t = std::make_shared<TensorData>();
    t->values.assign(shape_numel(shape), 0.0);
    t->shape = std::move(shape);
    t->requires_grad = requires_grad;
    return t;
}

Tensor make_tensor(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("make_tensor: values length does not match shape " +
                                    shape_str(shape));
    auto t = std::make_shared<TensorData>();
    t->shape = std::move(shape);
    t->values = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

Tensor make_scalar(double v, bool requires_grad) {
    return make_tensor({1}, {v}, requires_grad);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
          const double* b, double* c, bool accumulate) {
    // C[m,n] (+)= op(A)·op(B); A is [m,k] or [k,m], B is [k,n] or [n,k].
    if (!accumulate) std::fill(c, c + static_cast<std::size_t>(m) * n, 0.0);
    if (!trans_a && !trans_b) {
        for (int i = 0; i < m; ++i) {
            double* ci = c + static_cast<std::size_t>(i) * n;
            const double* ai = a + static_cast<std::size_t>(i) * k;
            for (int p = 0; p < k; ++p) {
                const double av = ai[p];
                const double* bp = b + static_cast<std::size_t>(p) * n;
                for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    } else if (!trans_a && trans_b) {
        for (int i = 0; i < m; ++i) {
            const double* ai = a + static_cast<std::size_t>(i) * k;
            double* ci = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                const double* bj = b + static_cast<std::size_t>(j) * k;
                double acc = 0.0;
                for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
                ci[j] += acc;
            }
        }
    } else if (trans_a && !trans_b) {
        for (int p = 0; p < k; ++p) {
            const double* ap = a + static_cast<std::size_t>(p) * m;
            const double* bp = b + static_cast<std::size_t>(p) * n;
            for (int i = 0; i < m; ++i) {
                const double av = ap[i];
                double* ci = c + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    } else {
        for (int i = 0; i < m; ++i) {
            double* ci = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                const double* bj = b + static_cast<std::size_t>(j) * k;
                double acc = 0.0;
                for (int p = 0; p < k; ++p) acc += a[static_cast<std::size_t>(p) * m + i] * bj[p];
                ci[j] += acc;
            }
        }
    }
}

Tensor Tape::track(Tensor t) {
    record_.push_back(t);
    return t;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->numel(); ++i) out->values[i] = a->values[i] + b->values[i];
    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, b](TensorData& o) {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) b->grad[i] += o.grad[i];
            }
        };
    }
    return track(out);
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->numel(); ++i) out->values[i] = a->values[i] - b->values[i];
    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, b](TensorData& o) {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) b->grad[i] -= o.grad[i];
            }
        };
    }
    return track(out);
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->numel(); ++i) out->values[i] = a->values[i] * b->values[i];
    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, b](TensorData& o) {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i] * b->values[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) b->grad[i] += o.grad[i] * a->values[i];
            }
        };
    }
    return track(out);
}

Tensor Tape::div(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "div");
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->numel(); ++i) out->values[i] = a->values[i] / b->values[i];
    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, b](TensorData& o) {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i] / b->values[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i)
                    b->grad[i] -= o.grad[i] * a->values[i] / (b->values[i] * b->values[i]);
            }
        };
    }
    return track(out);
}

Tensor Tape::scale(const Tensor& a, double s) {
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->numel(); ++i) out->values[i] = a->values[i] * s;
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, s](TensorData& o) {
            a->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i] * s;
        };
    }
    return track(out);
}

Tensor Tape::add_scalar(const Tensor& a, double s) {
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < out->numel(); ++i) out->values[i] = a->values[i] + s;
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a](TensorData& o) {
            a->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i];
        };
    }
    return track(out);
}

Tensor Tape::add_rowvec(const Tensor& x, const Tensor& bias) {
    if (x->shape.size() != 2 || bias->shape.size() != 1 || bias->shape[0] != x->shape[1])
        throw std::invalid_argument("add_rowvec: expected [n,d] + [d], got " +
                                    shape_str(x->shape) + " + " + shape_str(bias->shape));
    const int n = x->shape[0], d = x->shape[1];
    Tensor out = make_tensor(x->shape);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out->at(i, j) = x->at(i, j) + bias->values[j];
    out->requires_grad = x->requires_grad || bias->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [x, bias, n, d](TensorData& o) {
            if (x->requires_grad) {
                x->ensure_grad();
                for (std::size_t i = 0; i < o.grad.size(); ++i) x->grad[i] += o.grad[i];
            }
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j)
                        bias->grad[j] += o.grad[static_cast<std::size_t>(i) * d + j];
            }
        };
    }
    return track(out);
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a->shape) +
                                    " x " + shape_str(b->shape));
    const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
    Tensor out = make_tensor({m, n});
    gemm(false, false, m, n, k, a->values.data(), b->values.data(), out->values.data(), false);
    out->requires_grad = a->requires_grad || b->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, b, m, k, n](TensorData& o) {
            if (a->requires_grad) {
                a->ensure_grad();  // dA = dC·Bᵀ
                gemm(false, true, m, k, n, o.grad.data(), b->values.data(), a->grad.data(), true);
            }
            if (b->requires_grad) {
                b->ensure_grad();  // dB = Aᵀ·dC
                gemm(true, false, k, n, m, a->values.data(), o.grad.data(), b->grad.data(), true);
            }
        };
    }
    return track(out);
}

Tensor Tape::transpose_last_two(const Tensor& a) {
    if (a->shape.size() != 2)
        throw std::invalid_argument("transpose_last_two: expected 2-D, got " + shape_str(a->shape));
    const int m = a->shape[0], n = a->shape[1];
    Tensor out = make_tensor({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->at(j, i) = a->at(i, j);
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, m, n](TensorData& o) {
            a->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    a->grad[static_cast<std::size_t>(i) * n + j] +=
                        o.grad[static_cast<std::size_t>(j) * m + i];
        };
    }
    return track(out);
}

Tensor Tape::concat_last_axis(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_last_axis: empty part list");
    const int n = parts[0]->rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p->shape.size() != 2 || p->shape[0] != n)
            throw std::invalid_argument("concat_last_axis: row count mismatch");
        total += p->shape[1];
    }
    Tensor out = make_tensor({n, total});
    int off = 0;
    for (const auto& p : parts) {
        const int d = p->shape[1];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) out->at(i, off + j) = p->at(i, j);
        off += d;
        out->requires_grad = out->requires_grad || p->requires_grad;
    }
    if (out->requires_grad) {
        auto ps = parts;
        out->backward_fn = [ps, n, total](TensorData& o) {
            int off = 0;
            for (const auto& p : ps) {
                const int d = p->shape[1];
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < d; ++j)
                            p->grad[static_cast<std::size_t>(i) * d + j] +=
                                o.grad[static_cast<std::size_t>(i) * total + off + j];
                }
                off += d;
            }
        };
    }
    return track(out);
}

Tensor Tape::slice_cols(const Tensor& a, int c0, int c1) {
    if (a->shape.size() != 2 || c0 < 0 || c1 > a->shape[1] || c0 >= c1)
        throw std::invalid_argument("slice_cols: bad range on " + shape_str(a->shape));
    const int n = a->shape[0], dfull = a->shape[1], d = c1 - c0;
    Tensor out = make_tensor({n, d});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out->at(i, j) = a->at(i, c0 + j);
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, n, dfull, d, c0](TensorData& o) {
            a->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < d; ++j)
                    a->grad[static_cast<std::size_t>(i) * dfull + c0 + j] +=
                        o.grad[static_cast<std::size_t>(i) * d + j];
        };
    }
    return track(out);
}

Tensor Tape::sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a->values) acc += v;
    Tensor out = make_scalar(acc);
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a](TensorData& o) {
            a->ensure_grad();
            for (double& g : a->grad) g += o.grad[0];
        };
    }
    return track(out);
}

Tensor Tape::mean(const Tensor& a) {
    double acc = 0.0;
    for (double v : a->values) acc += v;
    const double inv = 1.0 / static_cast<double>(a->numel());
    Tensor out = make_scalar(acc * inv);
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, inv](TensorData& o) {
            a->ensure_grad();
            for (double& g : a->grad) g += o.grad[0] * inv;
        };
    }
    return track(out);
}

Tensor Tape::column_sums(const Tensor& a) {
    if (a->shape.size() != 2)
        throw std::invalid_argument("column_sums: expected 2-D, got " + shape_str(a->shape));
    const int n = a->shape[0], c = a->shape[1];
    Tensor out = make_tensor({c});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) out->values[j] += a->at(i, j);
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, n, c](TensorData& o) {
            a->ensure_grad();
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < c; ++j)
                    a->grad[static_cast<std::size_t>(i) * c + j] += o.grad[j];
        };
    }
    return track(out);
}

Tensor Tape::softmax(const Tensor& a, int axis) {
    if (a->shape.size() > 2)
        throw std::invalid_argument("softmax: only 1-D/2-D supported");
    const int rank = static_cast<int>(a->shape.size());
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank)
        throw std::invalid_argument("softmax: invalid axis for " + shape_str(a->shape));

    // normalize to row-wise on a 2-D view
    const bool along_cols = (rank == 1) || (axis == rank - 1);
    const int n = along_cols ? a->rows() : a->shape[1];
    const int d = along_cols ? a->cols() : a->shape[0];
    // captured by value: the backward closure outlives this scope
    auto idx = [along_cols, n, d](int i, int j) {
        return along_cols ? static_cast<std::size_t>(i) * d + j
                          : static_cast<std::size_t>(j) * n + i;
    };

    Tensor out = make_tensor(a->shape);
    for (int i = 0; i < n; ++i) {
        double mx = a->values[idx(i, 0)];
        for (int j = 1; j < d; ++j) mx = std::max(mx, a->values[idx(i, j)]);
        double z = 0.0;
        for (int j = 0; j < d; ++j) {
            const double e = std::exp(a->values[idx(i, j)] - mx);
            out->values[idx(i, j)] = e;
            z += e;
        }
        for (int j = 0; j < d; ++j) out->values[idx(i, j)] /= z;
    }
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        // o is the output itself; capturing it would create a shared_ptr cycle
        out->backward_fn = [a, idx, n, d](TensorData& o) {
            a->ensure_grad();  // dx = y ⊙ (dy − Σ dy·y) per slice
            for (int i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += o.grad[idx(i, j)] * o.values[idx(i, j)];
                for (int j = 0; j < d; ++j)
                    a->grad[idx(i, j)] += o.values[idx(i, j)] * (o.grad[idx(i, j)] - dot);
            }
        };
    }
    return track(out);
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (eps <= 0) throw std::invalid_argument("layer_norm: eps must be positive");
    const int d = x->cols();
    if (gamma->shape != std::vector<int>{d} || beta->shape != std::vector<int>{d})
        throw std::invalid_argument("layer_norm: gamma/beta must be [d] with d = " +
                                    std::to_string(d));
    const int n = static_cast<int>(x->numel()) / d;
    Tensor out = make_tensor(x->shape);
    auto xhat = std::make_shared<std::vector<double>>(x->numel());
    auto inv_std = std::make_shared<std::vector<double>>(n);
    for (int i = 0; i < n; ++i) {
        const double* xr = x->values.data() + static_cast<std::size_t>(i) * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += xr[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        double* h = xhat->data() + static_cast<std::size_t>(i) * d;
        double* o = out->values.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            h[j] = (xr[j] - mu) * is;
            o[j] = gamma->values[j] * h[j] + beta->values[j];
        }
    }
    out->requires_grad = x->requires_grad || gamma->requires_grad || beta->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [x, gamma, beta, xhat, inv_std, n, d](TensorData& o) {
            for (int i = 0; i < n; ++i) {
                const double* h = xhat->data() + static_cast<std::size_t>(i) * d;
                const double* go = o.grad.data() + static_cast<std::size_t>(i) * d;
                if (gamma->requires_grad) {
                    gamma->ensure_grad();
                    for (int j = 0; j < d; ++j) gamma->grad[j] += go[j] * h[j];
                }
                if (beta->requires_grad) {
                    beta->ensure_grad();
                    for (int j = 0; j < d; ++j) beta->grad[j] += go[j];
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    double s1 = 0.0, s2 = 0.0;  // Σ dŷ, Σ dŷ·x̂ with dŷ = γ·dy
                    for (int j = 0; j < d; ++j) {
                        const double dh = go[j] * gamma->values[j];
                        s1 += dh;
                        s2 += dh * h[j];
                    }
                    double* gx = x->grad.data() + static_cast<std::size_t>(i) * d;
                    const double is = (*inv_std)[i];
                    for (int j = 0; j < d; ++j) {
                        const double dh = go[j] * gamma->values[j];
                        gx[j] += is * (dh - (s1 + h[j] * s2) / d);
                    }
                }
            }
        };
    }
    return track(out);
}

Tensor Tape::gelu(const Tensor& a) {
    // tanh approximation: 0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))
    static constexpr double kC = 0.7978845608028654;  // √(2/π)
    static constexpr double kA = 0.044715;
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) {
        const double x = a->values[i];
        out->values[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
    }
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a](TensorData& o) {
            a->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                const double x = a->values[i];
                const double u = kC * (x + kA * x * x * x);
                const double t = std::tanh(u);
                const double du = kC * (1.0 + 3.0 * kA * x * x);
                a->grad[i] += o.grad[i] * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du);
            }
        };
    }
    return track(out);
}

Tensor Tape::sigmoid(const Tensor& a) {
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) {
        const double x = a->values[i];
        // branch on sign so exp never overflows
        out->values[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                : std::exp(x) / (1.0 + std::exp(x));
    }
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        // o is the output itself; capturing it would create a shared_ptr cycle
        out->backward_fn = [a](TensorData& o) {
            a->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                const double s = o.values[i];
                a->grad[i] += o.grad[i] * s * (1.0 - s);
            }
        };
    }
    return track(out);
}

Tensor Tape::log(const Tensor& a) {
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i) out->values[i] = std::log(a->values[i]);
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a](TensorData& o) {
            a->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) a->grad[i] += o.grad[i] / a->values[i];
        };
    }
    return track(out);
}

Tensor Tape::clamp(const Tensor& a, double lo, double hi) {
    Tensor out = make_tensor(a->shape);
    for (std::size_t i = 0; i < a->numel(); ++i)
        out->values[i] = std::min(hi, std::max(lo, a->values[i]));
    out->requires_grad = a->requires_grad;
    if (out->requires_grad) {
        out->backward_fn = [a, lo, hi](TensorData& o) {
            a->ensure_grad();  // pass-through inside the active range
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                if (a->values[i] > lo && a->values[i] < hi) a->grad[i] += o.grad[i];
        };
    }
    return track(out);
}

void Tape::backward(const Tensor& root) {
    if (!is_scalar(root)) throw std::invalid_argument("backward: root must be scalar");
    for (auto& t : record_) {
        if (t != root) t->grad.clear();
    }
    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = record_.rbegin(); it != record_.rend(); ++it) {
        TensorData& t = **it;
        if (t.requires_grad && t.backward_fn && !t.grad.empty()) t.backward_fn(t);
    }
}

}  // namespace kseg
