#include "gfl/autodiff.hpp"

#include <cassert>
#include <cmath>
#include <unordered_set>

#include "gfl/kernels/kernels.hpp"

namespace gfl {

namespace {
thread_local int g_no_grad_depth = 0;
}

bool grad_enabled() { return g_no_grad_depth == 0; }

NoGrad::NoGrad() { ++g_no_grad_depth; }
NoGrad::~NoGrad() { --g_no_grad_depth; }

Var make_leaf(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

Var make_const(Tensor value) { return make_leaf(std::move(value), false); }

Var make_op(const char* name, Tensor value, std::vector<Var> inputs,
            std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = name;
  bool needs = false;
  if (grad_enabled()) {
    for (const Var& in : inputs)
      if (in && in->requires_grad) {
        needs = true;
        break;
      }
  }
  if (needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backprop = std::move(backprop);
  }
  return n;
}

void accumulate_grad(const Var& v, const Tensor& g) {
  assert(v->value.same_shape(g));
  Tensor& dst = v->ensure_grad();
  kernels::active().axpy(static_cast<int>(g.numel()), 1.0, g.data(), dst.data());
}

void backward(const Var& root) {
  assert(root->value.numel() == 1);
  if (!root->requires_grad) return;

  // Iterative post-order DFS over grad-requiring nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  struct Frame {
    Node* node;
    size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      Node* in = f.node->inputs[f.next_input++].get();
      if (in && in->requires_grad && seen.insert(in).second) stack.push_back({in, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->has_grad()) n->backprop(*n);
  }
}

double gradient_check(const std::function<Var(const Var&)>& f, const Tensor& x, double h) {
  Var leaf = make_leaf(x, true);
  Var y = f(leaf);
  assert(y->value.numel() == 1);
  backward(y);
  Tensor analytic = leaf->has_grad() ? leaf->grad : Tensor(x.shape());

  double worst = 0.0;
  Tensor probe = x;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    double fp;
    {
      NoGrad ng;
      fp = f(make_const(probe))->value[0];
    }
    probe[i] = orig - h;
    double fm;
    {
      NoGrad ng;
      fm = f(make_const(probe))->value[0];
    }
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace gfl
