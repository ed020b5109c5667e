#pragma once
// Reverse-mode tape over whole tensors.
//
// Each op produces a Node that records its name, input references, and a
// backprop closure holding whatever intermediates the backward pass needs.
// backward() walks the graph in reverse topological order and accumulates
// gradients into every node that requires them. Replaying a forward with
// identical inputs yields identical outputs; traversal order is fixed by
// the recorded input order, so gradient accumulation is deterministic.

#include <functional>
#include <memory>
#include <vector>

#include "gfl/tensor.hpp"

namespace gfl {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // unallocated until the first accumulation
  bool requires_grad{false};
  const char* op{"leaf"};
  std::vector<Var> inputs;
  std::function<void(Node&)> backprop;

  bool has_grad() const { return grad.numel() > 0; }
  Tensor& ensure_grad() {
    if (!has_grad()) grad = Tensor(value.shape());
    return grad;
  }
};

Var make_leaf(Tensor value, bool requires_grad = false);
Var make_const(Tensor value);

// Records a new op node. When gradients are globally disabled or no input
// needs them, inputs and the closure are dropped so dead graphs free early.
Var make_op(const char* name, Tensor value, std::vector<Var> inputs,
            std::function<void(Node&)> backprop);

bool grad_enabled();

class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;
};

// Reverse pass from a scalar root (numel 1). Seeds d(root)/d(root) = 1.
void backward(const Var& root);

// Adds g into v's gradient buffer.
void accumulate_grad(const Var& v, const Tensor& g);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar-valued differentiable map evaluated at x.
double gradient_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                      double h = 1e-5);

}  // namespace gfl
