#include "swinhaze/nn/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "swinhaze/error.hpp"

namespace swinhaze::nn {

namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

real* Node::grad_data() {
    if (grad.empty()) grad.assign(value.size(), real{0});
    return grad.data();
}

Tensor::Tensor(Shape shape, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value.assign(element_count(shape), real{0});
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<real> values, bool requires_grad)
    : node_(std::make_shared<Node>()) {
    if (values.size() != element_count(shape)) {
        fail(ErrorCode::ShapeMismatch, "tensor of shape " + to_string(shape) + " given " +
                                           std::to_string(values.size()) + " values");
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::full(Shape shape, real value, bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    std::fill(t.node_->value.begin(), t.node_->value.end(), value);
    return t;
}

Tensor Tensor::make_result(Shape shape, std::vector<real> values,
                           std::initializer_list<Tensor> parents,
                           std::function<void(Node&)> backward) {
    return make_result(std::move(shape), std::move(values), std::vector<Tensor>(parents),
                       std::move(backward));
}

Tensor Tensor::make_result(Shape shape, std::vector<real> values,
                           const std::vector<Tensor>& parents,
                           std::function<void(Node&)> backward) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    const bool track = g_grad_enabled &&
                       std::any_of(parents.begin(), parents.end(),
                                   [](const Tensor& p) { return p.requires_grad(); });
    if (track) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (const Tensor& p : parents) node->parents.push_back(p.node_);
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

void Tensor::backward(std::span<const real> seed) const {
    if (seed.size() != size()) {
        fail(ErrorCode::ShapeMismatch, "backward seed does not match the tensor size");
    }
    if (!requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    real* g = node_->grad_data();
    for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

void Tensor::zero_grad() const {
    if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const {
    Tensor out(node_->shape, node_->value, false);
    return out;
}

Tensor Tensor::clone() const {
    return Tensor(node_->shape, node_->value, node_->requires_grad);
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace swinhaze::nn
