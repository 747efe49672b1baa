#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace kseg {

class Tape;

/// Dense 64-bit float tensor with optional gradient buffer.
/// Shapes are row-major; most of the engine works on 1-D and 2-D tensors.
struct TensorData {
    std::vector<int> shape;
    std::vector<double> values;
    std::vector<double> grad;  // sized lazily, same length as values
    bool requires_grad = false;

    // set by Tape ops; accumulates into operand grads
    std::function<void(TensorData&)> backward_fn;

    std::size_t numel() const { return values.size(); }
    int rows() const { return shape.size() >= 2 ? shape[shape.size() - 2] : 1; }
    int cols() const { return shape.empty() ? 1 : shape.back(); }

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols() + c]; }

    void ensure_grad();
    void zero_grad();
};

using Tensor = std::shared_ptr<TensorData>;

Tensor make_tensor(std::vector<int> shape, bool requires_grad = false);
Tensor make_tensor(std::vector<int> shape, std::vector<double> values,
                   bool requires_grad = false);
Tensor make_scalar(double v, bool requires_grad = false);

std::string shape_str(const std::vector<int>& shape);

/// Records every op of a forward pass in execution order.
/// backward() replays the record once, in reverse, accumulating gradients
/// into every requires_grad leaf. One tape per unit of work; a tape is not
/// shared across threads.
class Tape {
public:
    // elementwise / shape ops
    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor div(const Tensor& a, const Tensor& b);
    Tensor scale(const Tensor& a, double s);
    Tensor add_scalar(const Tensor& a, double s);
    Tensor add_rowvec(const Tensor& x, const Tensor& bias);  // [n,d] + [d]
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor transpose_last_two(const Tensor& a);
    Tensor concat_last_axis(const std::vector<Tensor>& parts);
    Tensor slice_cols(const Tensor& a, int c0, int c1);

    // reductions
    Tensor sum(const Tensor& a);
    Tensor mean(const Tensor& a);
    Tensor column_sums(const Tensor& a);  // [n,c] -> [c]

    // nonlinearities
    Tensor softmax(const Tensor& a, int axis);
    Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      double eps = 1e-5);
    Tensor gelu(const Tensor& a);
    Tensor sigmoid(const Tensor& a);
    Tensor log(const Tensor& a);
    Tensor clamp(const Tensor& a, double lo, double hi);

    /// root must be scalar; every requires_grad leaf reachable from the
    /// record receives d(root)/d(leaf). Deterministic.
    void backward(const Tensor& root);

    std::size_t size() const { return record_.size(); }
    void clear() { record_.clear(); }

private:
    Tensor track(Tensor t);
    std::vector<Tensor> record_;
};

// raw gemm helpers (no autodiff); C += or = op(A)·op(B)
void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
          const double* b, double* c, bool accumulate);

}  // namespace kseg
