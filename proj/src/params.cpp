#include "gfl/params.hpp"

#include "op_detail.hpp"

namespace gfl {

Var ParamSet::add(std::string name, Tensor init) {
  detail::require(find(name) == nullptr, "ParamSet: duplicate parameter " + name);
  Var v = make_leaf(std::move(init), true);
  items_.push_back({std::move(name), v});
  return v;
}

const Var* ParamSet::find(std::string_view name) const {
  for (const Item& it : items_)
    if (it.name == name) return &it.var;
  return nullptr;
}

int64_t ParamSet::total_count() const {
  int64_t n = 0;
  for (const Item& it : items_) n += it.var->value.numel();
  return n;
}

void ParamSet::zero_grads() const {
  for (const Item& it : items_)
    if (it.var->has_grad()) it.var->grad.fill(0.0);
}

Tensor init_normal(std::vector<int64_t> shape, const RandomStream& model_stream,
                   std::string_view name, double stddev) {
  Tensor t(std::move(shape));
  fill_normal(t, model_stream.derive(name), stddev);
  return t;
}

Tensor init_const(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

}  // namespace gfl
