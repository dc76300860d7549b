#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgfuse/autodiff.hpp"
#include "kgfuse/graph.hpp"

namespace kgfuse {

/// The five fusion pipelines compared in the experiments. KGF is the
/// global-node-guided multi-head GAT; the others are baselines.
enum class FusionVariant { KGF, ConcatFusion, SelfAttFusion, GCN, IndependentGAT };

std::string to_string(FusionVariant v);
std::string display_name(FusionVariant v);
FusionVariant fusion_from_string(const std::string& s);
inline constexpr FusionVariant kAllFusionVariants[] = {
    FusionVariant::ConcatFusion, FusionVariant::SelfAttFusion, FusionVariant::GCN,
    FusionVariant::IndependentGAT, FusionVariant::KGF};

struct ModelConfig {
    int d_t = 16;
    int d_v = 16;
    int d = 16;          // shared latent space dimension
    int num_heads = 4;   // ignored by GCN (single transform per layer)
    int num_layers = 2;
    int d_hidden = 16;   // per-head output dimension per GAT layer
    int num_classes = 5;
    FusionVariant fusion = FusionVariant::KGF;
    bool use_global_concat = true;
    bool use_knowledge = true;
    double leaky_slope = 0.2;
    std::uint64_t seed = 1;

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-layer dimension plan for the graph variants (KGF, IndependentGAT,
/// GCN): node_in is the node state entering the layer, theta_in what the
/// transformation actually sees (5x node_in under global concatenation),
/// node_out the state leaving the layer.
struct GatLayerDims {
    int node_in = 0;
    int theta_in = 0;
    int node_out = 0;
};
std::vector<GatLayerDims> gat_layer_plan(const ModelConfig& cfg);
int pooled_dim(const ModelConfig& cfg);

struct AffineParams {
    Param w;
    Param b;
};

struct HeadParams {
    Param theta;
    std::optional<Param> attn; // absent for GCN
};

/// All trainable tensors for one configuration, with stable canonical
/// ordering (initialization draws, checkpoints and the optimizer all follow
/// refs() order).
class ModelParams {
public:
    explicit ModelParams(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    ParamRefs refs();
    std::vector<const Param*> refs() const;
    Param* find(const std::string& name);

    /// Copies parameter values (not grads) from another instance with an
    /// identical configuration.
    void copy_values_from(const ModelParams& other);

    AffineParams proj_text;
    AffineParams proj_key;
    AffineParams proj_visual;
    std::vector<std::vector<HeadParams>> layers; // [layer][head]
    AffineParams cls_hidden;
    AffineParams cls_out;

private:
    ModelConfig cfg_;
};

/// Glorot-uniform weights, zero biases, deterministic per cfg.seed.
ModelParams init_params(const ModelConfig& cfg);

/// Uniform bound used by init_params for a weight with the given fans.
double glorot_bound(int fan_in, int fan_out);

struct Prediction {
    Tensor probs;
    int label = 0;   // argmax, ties resolve to the lowest index
    Tensor pooled;   // aggregated representation r, for diagnostics
};

/// Attention matrices captured during a forward pass, one [V x V] row-
/// stochastic matrix per (layer, head) in evaluation order.
struct ForwardTrace {
    std::vector<Tensor> attention;
};

// ---- tape-level building blocks (exposed for unit tests) ----

/// Shared-space projection of every node: textual globals and entities
/// through proj_text, keyphrases through proj_key, visual nodes through
/// proj_visual; ReLU on top, output [V x d].
Tape::Var project_nodes(Tape& tape, const HeteroGraph& graph, Tape::Var wt, Tape::Var bt,
                        Tape::Var wk, Tape::Var bk, Tape::Var wv, Tape::Var bv);

struct GatHeadVars {
    Tape::Var theta;
    Tape::Var attn;
};

/// One multi-head GAT layer over already-augmented states. Heads are
/// concatenated on hidden layers and averaged on the final layer.
Tape::Var gat_layer(Tape& tape, Tape::Var states, const Tensor& edge_factors,
                    std::span<const GatHeadVars> heads, double leaky_slope, bool is_final,
                    int layer_index, ForwardTrace* trace = nullptr);

/// Row-normalized edge factors used by the GCN baseline; rows sum to 1.
Tensor gcn_coefficients(const HeteroGraph& graph);

// ---- whole-model entry points ----

/// Inference forward pass (params read-only).
Prediction predict(const HeteroGraph& graph, const ModelParams& params,
                   ForwardTrace* trace = nullptr);

/// Builds the forward pass and cross-entropy loss on the tape with params
/// recorded as differentiable leaves; returns the scalar loss var.
Tape::Var training_loss(Tape& tape, const HeteroGraph& graph, ModelParams& params, int label);

} // namespace kgfuse
