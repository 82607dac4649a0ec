#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace swinhaze::nn {

using real = float;
using Shape = std::vector<int>;

std::size_t element_count(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<real> value;
    std::vector<real> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    real* grad_data();
};

// Shared handle to a value in the autograd graph. Copies alias the same node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);
    Tensor(Shape shape, std::vector<real> values, bool requires_grad = false);

    static Tensor full(Shape shape, real value, bool requires_grad = false);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int dim(int i) const { return node_->shape[static_cast<std::size_t>(i < 0 ? i + rank() : i)]; }
    std::size_t size() const { return node_->value.size(); }
    bool requires_grad() const noexcept { return node_ && node_->requires_grad; }

    std::span<const real> values() const { return node_->value; }
    std::span<real> mutable_values() { return node_->value; }
    // Empty until a backward pass reached this tensor.
    std::span<const real> grad() const { return node_->grad; }

    // Seeds d(out)/d(this) with `seed` and accumulates gradients into every
    // reachable tensor that requires them.
    void backward(std::span<const real> seed) const;
    void zero_grad() const;

    // Same values, no history.
    Tensor detach() const;
    // Independent copy of values (and requires_grad flag).
    Tensor clone() const;

    Node* node() const noexcept { return node_.get(); }
    const std::shared_ptr<Node>& node_ptr() const noexcept { return node_; }

    // Builds an op result. History is recorded only if grad mode is on and some
    // parent requires gradients.
    static Tensor make_result(Shape shape, std::vector<real> values,
                              std::initializer_list<Tensor> parents,
                              std::function<void(Node&)> backward);
    static Tensor make_result(Shape shape, std::vector<real> values,
                              const std::vector<Tensor>& parents,
                              std::function<void(Node&)> backward);

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

bool grad_enabled() noexcept;

// Disables graph recording for its lifetime (inference).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

}  // namespace swinhaze::nn
