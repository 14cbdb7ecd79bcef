#include "stdown/ad/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace stdown::ad {

namespace {
thread_local bool t_grad_enabled = true;
bool g_finite_checks = false;
}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks() { return g_finite_checks; }

Value constant(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->tag = "constant";
    return n;
}

Value param(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = true;
    n->tag = "param";
    return n;
}

namespace {

// Iterative postorder over parents; result is a topological order with
// every parent preceding its consumers' position in the reversed list.
std::vector<Node*> toposort(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i].get();
            ++i;
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    return order;
}

class NodeSink final : public GradSink {
public:
    Tensor* acc(Node* n) override {
        if (!n->requires_grad) return nullptr;
        if (n->grad.empty()) n->grad = Tensor::zeros(n->value.shape());
        return &n->grad;
    }
};

class MapSink final : public GradSink {
public:
    std::unordered_map<Node*, Tensor> grads;
    Tensor* acc(Node* n) override {
        if (!n->requires_grad) return nullptr;
        auto it = grads.find(n);
        if (it == grads.end()) it = grads.emplace(n, Tensor::zeros(n->value.shape())).first;
        return &it->second;
    }
};

void sweep(const Value& loss, GradSink& sink) {
    if (loss->value.size() != 1)
        throw std::invalid_argument("backward requires a scalar loss, got " +
                                    shape_str(loss->value.shape()));
    auto order = toposort(loss.get());
    // local gradients of interior nodes live here during the sweep
    std::unordered_map<Node*, Tensor> local;
    local.reserve(order.size());
    local[loss.get()] = Tensor::scalar(1.0);

    class SweepSink final : public GradSink {
    public:
        SweepSink(std::unordered_map<Node*, Tensor>& l, GradSink& leaf) : local_(l), leaf_(leaf) {}
        Tensor* acc(Node* n) override {
            if (!n->requires_grad) return nullptr;
            if (!n->backprop) return leaf_.acc(n);  // leaf (param)
            auto it = local_.find(n);
            if (it == local_.end()) it = local_.emplace(n, Tensor::zeros(n->value.shape())).first;
            return &it->second;
        }

    private:
        std::unordered_map<Node*, Tensor>& local_;
        GradSink& leaf_;
    } ssink(local, sink);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->backprop) continue;
        auto g = local.find(n);
        if (g == local.end()) continue;  // no gradient reached this node
        n->backprop(g->second, ssink);
        local.erase(g);  // free as we go
    }
}

}  // namespace

void backward(const Value& loss) {
    // reset so repeated backward calls are bit-identical
    for (Node* n : toposort(loss.get())) n->grad = Tensor();
    NodeSink sink;
    sweep(loss, sink);
}

std::unordered_map<Node*, Tensor> backward_collect(const Value& loss) {
    MapSink sink;
    sweep(loss, sink);
    return std::move(sink.grads);
}

std::vector<const Node*> walk_graph(const Value& root) {
    std::vector<const Node*> out;
    std::unordered_set<const Node*> seen;
    std::vector<const Node*> stack{root.get()};
    seen.insert(root.get());
    while (!stack.empty()) {
        const Node* n = stack.back();
        stack.pop_back();
        out.push_back(n);
        for (const auto& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    return out;
}

}  // namespace stdown::ad
