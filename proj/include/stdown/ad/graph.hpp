#pragma once

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "stdown/ad/tensor.hpp"

namespace stdown::ad {

class Node;
using Value = std::shared_ptr<Node>;

// Receives gradient contributions during a backward sweep. Returns the
// accumulation buffer for a node, or nullptr when the node needs none.
class GradSink {
public:
    virtual ~GradSink() = default;
    virtual Tensor* acc(Node* n) = 0;
};

// One value in the computation graph. Parents plus a backprop closure
// realize reverse-mode differentiation; gradients accumulate additively
// across fan-out, each node visited exactly once in reverse topological
// order.
class Node {
public:
    Tensor value;
    Tensor grad;  // filled by backward(); empty otherwise
    bool requires_grad = false;
    const char* tag = "leaf";
    std::vector<Value> parents;
    std::function<void(const Tensor& gout, GradSink& sink)> backprop;
};

// Recording can be switched off per thread for pure inference.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Debug guard: when on, every op verifies its outputs are finite.
void set_finite_checks(bool on);
bool finite_checks();

Value constant(Tensor v);
Value param(Tensor v);

// Reverse sweep from a scalar loss; writes Node::grad on every tensor
// that requires grad. Grads are reset first, so repeated calls on the
// same graph are bit-identical.
void backward(const Value& loss);

// Same sweep, but gradients go to a private map keyed by leaf node.
// Safe to run concurrently on independent graphs sharing leaf params.
std::unordered_map<Node*, Tensor> backward_collect(const Value& loss);

// Every node reachable through recorded parents (for graph audits).
std::vector<const Node*> walk_graph(const Value& root);

}  // namespace stdown::ad
