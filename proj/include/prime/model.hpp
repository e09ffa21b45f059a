#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prime/layers.hpp"
#include "prime/tensor.hpp"

namespace prime {

// Parameter partitions: z = attention backbone (frozen after base training),
// s = shared hidden stack, task heads (old heads are the task heads of
// earlier stages; which of them count as frozen is a property of the
// training plan, not of the model).
enum class Partition { backbone, shared, head };

struct Head {
    DenseLayer out;
    std::vector<int> class_ids;   // column -> global class id
    std::size_t input_width = 0;  // shared-feature prefix this head reads
};

struct ExpansionRecord {
    std::size_t layer = 0;  // hidden layer index
    std::size_t old_width = 0;
    std::size_t new_width = 0;
    double factor = 0.0;
    double eps0 = 0.0;
};

struct Model {
    std::size_t input_width = 0;
    EncoderLayer encoder;
    std::vector<DenseLayer> hidden;
    double dropout_rate = 0.0;
    std::vector<Head> heads;

    std::vector<ExpansionRecord> expansions;
    // Per-parameter 0/1 masks marking newborn entries from the latest
    // widening; present only between widen() and the end of the
    // expansion-phase training that absorbs them.
    std::map<std::string, Tensor> fresh_masks;

    std::size_t feature_width() const {
        return hidden.empty() ? input_width : hidden.back().out_dim();
    }
};

Model build_model(std::size_t input_width, std::size_t token_dim, std::size_t attn_heads,
                  const std::vector<std::size_t>& hidden_dims, double dropout_rate,
                  std::uint64_t seed);

// Attach a task head over the current feature width; returns its index.
std::size_t add_head(Model& m, const std::vector<int>& class_ids, std::uint64_t seed);

struct ParamRef {
    std::string name;
    Tensor* tensor;
    Partition part;
    int head = -1;  // head index for Partition::head, -1 otherwise
};

std::vector<ParamRef> param_refs(Model& m);
std::size_t param_count(const Model& m);

// Which parameters receive gradients.  `fresh_only` restricts shared-stack
// updates to the entries flagged in Model::fresh_masks (hidden layers with
// no mask stay fully frozen); otherwise `hidden` controls the whole stack.
struct TrainPlan {
    bool encoder = false;
    bool hidden = false;
    bool fresh_only = false;
    std::vector<std::size_t> heads;
    double l2 = 0.0;

    bool head_trainable(std::size_t h) const {
        for (std::size_t i : heads)
            if (i == h) return true;
        return false;
    }
};

struct ForwardTrace {
    Tensor input;
    EncoderTrace enc;  // populated only when encoder gradients were requested
    bool enc_traced = false;
    Tensor encoded;
    std::vector<Tensor> pre;       // per hidden layer, pre-ReLU
    std::vector<Tensor> post;      // post-ReLU (the activation trace)
    std::vector<Tensor> dropped;   // what actually feeds the next layer
    std::vector<Tensor> drop_mask; // empty in eval mode
    std::vector<Tensor> logits;    // one per head
    bool training = false;
};

// Dropout is driven solely by rng_seed and active only in train mode.
// trace_encoder requests the intermediates needed to backprop into the
// backbone (only base training wants them).
ForwardTrace forward(const Model& m, const Tensor& batch, bool train_mode, std::uint64_t rng_seed,
                     bool trace_encoder = false);

struct Gradients {
    std::map<std::string, Tensor> by_name;

    Tensor* find(const std::string& name) {
        auto it = by_name.find(name);
        return it == by_name.end() ? nullptr : &it->second;
    }
};

// dlogits holds one gradient tensor per head; an empty tensor means that head
// contributes nothing.  Gradients flow through frozen heads into the shared
// stack, but only parameters selected by the plan appear in the result.
// When plan.l2 > 0 the penalty gradient 2*l2*theta is folded in for every
// trainable (and unmasked) parameter entry.
Gradients backward(const Model& m, const ForwardTrace& trace, const std::vector<Tensor>& dlogits,
                   const TrainPlan& plan);

// L2 penalty matching the gradient contribution above: l2 * sum(theta^2)
// over the plan's trainable entries.
double l2_penalty(const Model& m, const TrainPlan& plan);

}  // namespace prime
