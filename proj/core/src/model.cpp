#include "kgfuse/model.hpp"

#include <algorithm>
#include <cmath>

#include "kgfuse/rng.hpp"

namespace kgfuse {

std::string to_string(FusionVariant v) {
    switch (v) {
        case FusionVariant::KGF: return "kgf";
        case FusionVariant::ConcatFusion: return "concat";
        case FusionVariant::SelfAttFusion: return "self_att";
        case FusionVariant::GCN: return "gcn";
        case FusionVariant::IndependentGAT: return "independent_gat";
    }
    throw ValidationError("unreachable fusion variant");
}

std::string display_name(FusionVariant v) {
    switch (v) {
        case FusionVariant::KGF: return "KGF (Ours)";
        case FusionVariant::ConcatFusion: return "Concat Fusion";
        case FusionVariant::SelfAttFusion: return "Self-att Fusion";
        case FusionVariant::GCN: return "GCN";
        case FusionVariant::IndependentGAT: return "Independent GAT";
    }
    throw ValidationError("unreachable fusion variant");
}

FusionVariant fusion_from_string(const std::string& s) {
    for (FusionVariant v : kAllFusionVariants) {
        if (to_string(v) == s) return v;
    }
    throw ValidationError("unknown fusion variant '" + s + "'");
}

void ModelConfig::validate() const {
    if (d_t < 1 || d_v < 1) throw ValidationError("model: d_t and d_v must be positive");
    if (d < 1) throw ValidationError("model: shared dimension d must be positive");
    if (num_heads < 1) throw ValidationError("model: num_heads must be at least 1");
    if (num_layers < 1) throw ValidationError("model: num_layers must be at least 1");
    if (d_hidden < 1) throw ValidationError("model: d_hidden must be positive");
    if (num_classes < 2) throw ValidationError("model: num_classes must be at least 2");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
        throw ValidationError("model: leaky_slope must lie in (0, 1)");
    }
}

namespace {

bool uses_gat_stack(FusionVariant v) {
    return v == FusionVariant::KGF || v == FusionVariant::IndependentGAT ||
           v == FusionVariant::GCN;
}

int effective_heads(const ModelConfig& cfg) {
    return cfg.fusion == FusionVariant::GCN ? 1 : cfg.num_heads;
}

bool effective_global_concat(const ModelConfig& cfg) {
    return cfg.fusion == FusionVariant::KGF && cfg.use_global_concat;
}

} // namespace

std::vector<GatLayerDims> gat_layer_plan(const ModelConfig& cfg) {
    cfg.validate();
    if (!uses_gat_stack(cfg.fusion)) return {};
    const int heads = effective_heads(cfg);
    const bool gc = effective_global_concat(cfg);
    std::vector<GatLayerDims> plan;
    int node = cfg.d;
    for (int l = 0; l < cfg.num_layers; ++l) {
        GatLayerDims dims;
        dims.node_in = node;
        dims.theta_in = gc ? 5 * node : node;
        dims.node_out = (l == cfg.num_layers - 1) ? cfg.d_hidden : heads * cfg.d_hidden;
        plan.push_back(dims);
        node = dims.node_out;
    }
    return plan;
}

int pooled_dim(const ModelConfig& cfg) {
    switch (cfg.fusion) {
        case FusionVariant::ConcatFusion: return 5 * cfg.d;
        case FusionVariant::SelfAttFusion: return cfg.d;
        default: return cfg.d_hidden;
    }
}

ModelParams::ModelParams(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    proj_text = {Param("proj_text.w", Tensor({cfg.d, cfg.d_t})),
                 Param("proj_text.b", Tensor({cfg.d}))};
    proj_key = {Param("proj_key.w", Tensor({cfg.d, cfg.d_t})),
                Param("proj_key.b", Tensor({cfg.d}))};
    proj_visual = {Param("proj_visual.w", Tensor({cfg.d, cfg.d_v})),
                   Param("proj_visual.b", Tensor({cfg.d}))};
    const auto plan = gat_layer_plan(cfg_);
    const int heads = effective_heads(cfg_);
    for (std::size_t l = 0; l < plan.size(); ++l) {
        std::vector<HeadParams> layer;
        for (int h = 0; h < heads; ++h) {
            const std::string base =
                "gat.l" + std::to_string(l) + ".h" + std::to_string(h) + ".";
            HeadParams head;
            head.theta = Param(base + "theta", Tensor({cfg.d_hidden, plan[l].theta_in}));
            if (cfg_.fusion != FusionVariant::GCN) {
                head.attn = Param(base + "a", Tensor({2 * cfg.d_hidden}));
            }
            layer.push_back(std::move(head));
        }
        layers.push_back(std::move(layer));
    }
    const int pool = pooled_dim(cfg_);
    cls_hidden = {Param("cls.w0", Tensor({cfg.d, pool})), Param("cls.b0", Tensor({cfg.d}))};
    cls_out = {Param("cls.w1", Tensor({cfg.num_classes, cfg.d})),
               Param("cls.b1", Tensor({cfg.num_classes}))};
}

ParamRefs ModelParams::refs() {
    ParamRefs out;
    for (AffineParams* p : {&proj_text, &proj_key, &proj_visual}) {
        out.push_back(&p->w);
        out.push_back(&p->b);
    }
    for (auto& layer : layers) {
        for (auto& head : layer) {
            out.push_back(&head.theta);
            if (head.attn) out.push_back(&*head.attn);
        }
    }
    for (AffineParams* p : {&cls_hidden, &cls_out}) {
        out.push_back(&p->w);
        out.push_back(&p->b);
    }
    return out;
}

std::vector<const Param*> ModelParams::refs() const {
    auto mutable_refs = const_cast<ModelParams*>(this)->refs();
    return {mutable_refs.begin(), mutable_refs.end()};
}

Param* ModelParams::find(const std::string& name) {
    for (Param* p : refs()) {
        if (p->name == name) return p;
    }
    return nullptr;
}

void ModelParams::copy_values_from(const ModelParams& other) {
    if (!(cfg_ == other.cfg_)) {
        throw ValidationError("copy_values_from: configurations differ");
    }
    auto dst = refs();
    auto src = other.refs();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i]->value = src[i]->value;
}

double glorot_bound(int fan_in, int fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

namespace {

void fill_glorot(Param& p, int fan_in, int fan_out, Rng& rng) {
    const double bound = glorot_bound(fan_in, fan_out);
    for (std::int64_t i = 0; i < p.value.size(); ++i) {
        p.value.flat(i) = rng.uniform(-bound, bound);
    }
}

} // namespace

ModelParams init_params(const ModelConfig& cfg) {
    ModelParams params(cfg);
    Rng rng(cfg.seed);
    fill_glorot(params.proj_text.w, cfg.d_t, cfg.d, rng);
    fill_glorot(params.proj_key.w, cfg.d_t, cfg.d, rng);
    fill_glorot(params.proj_visual.w, cfg.d_v, cfg.d, rng);
    for (auto& layer : params.layers) {
        for (auto& head : layer) {
            fill_glorot(head.theta, head.theta.value.cols(), head.theta.value.rows(), rng);
            if (head.attn) fill_glorot(*head.attn, 2 * cfg.d_hidden, 1, rng);
        }
    }
    fill_glorot(params.cls_hidden.w, pooled_dim(cfg), cfg.d, rng);
    fill_glorot(params.cls_out.w, cfg.d, cfg.num_classes, rng);
    return params;
}

// ---------------------------------------------------------------------------
// forward pipeline
// ---------------------------------------------------------------------------

namespace {

/// Canonical node layout: [t_c, t_e, T...] [K...] [o_c, o_e, O...].
struct CanonicalLayout {
    int t_count = 0;
    int k_count = 0;
    int o_count = 0;

    int text_begin() const { return 0; }        // t_c, t_e, entities
    int text_rows() const { return 2 + t_count; }
    int key_begin() const { return 2 + t_count; }
    int key_rows() const { return k_count; }
    int visual_begin() const { return 2 + t_count + k_count; }
    int visual_rows() const { return 2 + o_count; }
};

CanonicalLayout layout_of(const HeteroGraph& g) {
    CanonicalLayout l;
    for (const auto& node : g.nodes) {
        switch (node.kind) {
            case NodeKind::TextEntity: ++l.t_count; break;
            case NodeKind::KeyPhrase: ++l.k_count; break;
            case NodeKind::VisualObject: ++l.o_count; break;
            default: break;
        }
    }
    return l;
}

Tensor stack_embeddings(const HeteroGraph& g, int begin, int count, int dim, const char* what) {
    Tensor out({count, dim});
    for (int i = 0; i < count; ++i) {
        const auto& emb = g.nodes[static_cast<std::size_t>(begin + i)].embedding;
        if (static_cast<int>(emb.size()) != dim) {
            throw ValidationError(std::string("projection input mismatch for ") + what +
                                  " node: embedding has " + std::to_string(emb.size()) +
                                  " values, projection expects " + std::to_string(dim));
        }
        for (int j = 0; j < dim; ++j) out.at(i, j) = emb[static_cast<std::size_t>(j)];
    }
    return out;
}

/// raw rows -> ReLU(X W^T + b), a [count x d] block.
Tape::Var project_block(Tape& tape, const HeteroGraph& g, int begin, int count, int dim,
                        Tape::Var w, Tape::Var b, const char* what) {
    Tape::Var x = tape.constant(stack_embeddings(g, begin, count, dim, what));
    return tape.relu(tape.add_row_broadcast(tape.matmul(x, tape.transpose(w)), b));
}

} // namespace

Tape::Var project_nodes(Tape& tape, const HeteroGraph& graph, Tape::Var wt, Tape::Var bt,
                        Tape::Var wk, Tape::Var bk, Tape::Var wv, Tape::Var bv) {
    const CanonicalLayout l = layout_of(graph);
    const int d_t = tape.value(wt).cols();
    const int d_v = tape.value(wv).cols();
    std::vector<Tape::Var> blocks;
    blocks.push_back(project_block(tape, graph, l.text_begin(), l.text_rows(), d_t, wt, bt,
                                   "textual"));
    if (l.key_rows() > 0) {
        blocks.push_back(project_block(tape, graph, l.key_begin(), l.key_rows(), d_t, wk, bk,
                                       "keyphrase"));
    }
    blocks.push_back(project_block(tape, graph, l.visual_begin(), l.visual_rows(), d_v, wv, bv,
                                   "visual"));
    return blocks.size() == 1 ? blocks[0] : tape.concat_rows(blocks);
}

Tape::Var gat_layer(Tape& tape, Tape::Var states, const Tensor& edge_factors,
                    std::span<const GatHeadVars> heads, double leaky_slope, bool is_final,
                    int layer_index, ForwardTrace* trace) {
    if (heads.empty()) throw ValidationError("gat_layer needs at least one head");
    const int d_hidden = tape.value(heads[0].theta).rows();
    std::vector<Tape::Var> head_outputs;
    for (std::size_t h = 0; h < heads.size(); ++h) {
        Tape::Var z = tape.matmul(states, tape.transpose(heads[h].theta));
        // a^T LeakyReLU([z_i || z_j]) decomposes into a1.u_i + a2.u_j because
        // the activation is elementwise
        Tape::Var u = tape.leaky_relu(z, leaky_slope);
        Tape::Var a1 = tape.slice1d(heads[h].attn, 0, d_hidden);
        Tape::Var a2 = tape.slice1d(heads[h].attn, d_hidden, 2 * d_hidden);
        Tape::Var logits = tape.outer_sum(tape.matvec(u, a1), tape.matvec(u, a2));
        if (!tape.value(logits).all_finite()) {
            throw NumericError("gat layer " + std::to_string(layer_index) + " head " +
                               std::to_string(h) + ": non-finite attention logits");
        }
        Tape::Var gamma = tape.row_softmax(logits, edge_factors);
        if (trace) trace->attention.push_back(tape.value(gamma));
        head_outputs.push_back(tape.matmul(gamma, z));
    }
    if (!is_final) {
        return head_outputs.size() == 1 ? head_outputs[0] : tape.concat_cols(head_outputs);
    }
    Tape::Var acc = head_outputs[0];
    for (std::size_t h = 1; h < head_outputs.size(); ++h) acc = tape.add(acc, head_outputs[h]);
    return head_outputs.size() == 1
               ? acc
               : tape.scale(acc, 1.0 / static_cast<double>(head_outputs.size()));
}

Tensor gcn_coefficients(const HeteroGraph& graph) {
    Tensor f = edge_factors(graph);
    for (int i = 0; i < f.rows(); ++i) {
        double denom = 0.0;
        for (int j = 0; j < f.cols(); ++j) denom += f.at(i, j);
        for (int j = 0; j < f.cols(); ++j) f.at(i, j) /= denom;
    }
    return f;
}

namespace {

struct ForwardVars {
    Tape::Var pooled;
    Tape::Var probs;
};

/// Variant pipelines over an adapter that maps Params to tape vars (tracked
/// leaves for training, constants for inference).
template <typename MP, typename ParamUse>
ForwardVars build_forward(Tape& tape, const HeteroGraph& graph_in, MP& params, ParamUse use,
                          ForwardTrace* trace) {
    const ModelConfig& cfg = params.config();
    cfg.validate();

    HeteroGraph reduced;
    const HeteroGraph* gp = &graph_in;
    if (!cfg.use_knowledge) {
        reduced = globals_only(graph_in);
        gp = &reduced;
    }
    const HeteroGraph& g = *gp;

    Tape::Var wt = use(params.proj_text.w), bt = use(params.proj_text.b);
    Tape::Var wk = use(params.proj_key.w), bk = use(params.proj_key.b);
    Tape::Var wv = use(params.proj_visual.w), bv = use(params.proj_visual.b);

    Tape::Var pooled;
    switch (cfg.fusion) {
        case FusionVariant::ConcatFusion: {
            // r = [proj(t_c) || proj(t_e) || proj(o_c) || proj(o_e) || mean of
            // projected knowledge nodes]; the fifth block is zero when no
            // knowledge nodes survive, keeping the pooled dimension fixed.
            auto project_vec = [&](const std::vector<double>& emb, Tape::Var w, Tape::Var b,
                                   const char* what) {
                if (static_cast<int>(emb.size()) != tape.value(w).cols()) {
                    throw ValidationError(std::string("projection input mismatch for ") + what +
                                          " global node");
                }
                Tape::Var x = tape.constant(Tensor::vector(emb));
                return tape.relu(tape.add(tape.matvec(w, x), b));
            };
            const auto& gi = g.global_index;
            std::vector<Tape::Var> blocks;
            blocks.push_back(project_vec(g.nodes[static_cast<std::size_t>(gi[0])].embedding, wt,
                                         bt, "claim text"));
            blocks.push_back(project_vec(g.nodes[static_cast<std::size_t>(gi[1])].embedding, wt,
                                         bt, "evidence text"));
            blocks.push_back(project_vec(g.nodes[static_cast<std::size_t>(gi[2])].embedding, wv,
                                         bv, "claim image"));
            blocks.push_back(project_vec(g.nodes[static_cast<std::size_t>(gi[3])].embedding, wv,
                                         bv, "evidence image"));

            const CanonicalLayout l = layout_of(g);
            std::vector<Tape::Var> knowledge;
            if (l.t_count > 0) {
                knowledge.push_back(project_block(tape, g, 2, l.t_count, cfg.d_t, wt, bt,
                                                  "text entity"));
            }
            if (l.k_count > 0) {
                knowledge.push_back(project_block(tape, g, l.key_begin(), l.k_count, cfg.d_t, wk,
                                                  bk, "keyphrase"));
            }
            if (l.o_count > 0) {
                knowledge.push_back(project_block(tape, g, l.visual_begin() + 2, l.o_count,
                                                  cfg.d_v, wv, bv, "visual object"));
            }
            if (knowledge.empty()) {
                blocks.push_back(tape.constant(Tensor({cfg.d})));
            } else {
                Tape::Var all = knowledge.size() == 1 ? knowledge[0]
                                                      : tape.concat_rows(knowledge);
                blocks.push_back(tape.mean_rows(all));
            }
            pooled = tape.concat_vecs(blocks);
            break;
        }
        case FusionVariant::SelfAttFusion: {
            // one scaled dot-product pass: each projected node attends over
            // all projected nodes; no edge factors, no learned attention
            Tape::Var m0 = project_nodes(tape, g, wt, bt, wk, bk, wv, bv);
            Tape::Var logits =
                tape.scale(tape.matmul(m0, tape.transpose(m0)), 1.0 / std::sqrt(cfg.d));
            Tensor ones({g.size(), g.size()});
            std::fill(ones.values().begin(), ones.values().end(), 1.0);
            Tape::Var gamma = tape.row_softmax(logits, std::move(ones));
            if (trace) trace->attention.push_back(tape.value(gamma));
            pooled = tape.mean_rows(tape.matmul(gamma, m0));
            break;
        }
        case FusionVariant::GCN: {
            Tape::Var m = project_nodes(tape, g, wt, bt, wk, bk, wv, bv);
            Tensor coeffs = gcn_coefficients(g);
            for (std::size_t l = 0; l < params.layers.size(); ++l) {
                if (trace) trace->attention.push_back(coeffs);
                Tape::Var z =
                    tape.matmul(m, tape.transpose(use(params.layers[l][0].theta)));
                m = tape.matmul(tape.constant(coeffs), z);
            }
            pooled = tape.mean_rows(m);
            break;
        }
        case FusionVariant::KGF:
        case FusionVariant::IndependentGAT: {
            Tape::Var m = project_nodes(tape, g, wt, bt, wk, bk, wv, bv);
            const Tensor factors = edge_factors(g);
            const bool gc = effective_global_concat(cfg);
            for (std::size_t l = 0; l < params.layers.size(); ++l) {
                Tape::Var layer_in = gc ? tape.global_concat(m, g.global_index) : m;
                std::vector<GatHeadVars> heads;
                for (auto& head : params.layers[l]) {
                    heads.push_back({use(head.theta), use(*head.attn)});
                }
                m = gat_layer(tape, layer_in, factors, heads, cfg.leaky_slope,
                              l + 1 == params.layers.size(), static_cast<int>(l), trace);
            }
            pooled = tape.mean_rows(m);
            break;
        }
    }

    Tape::Var hidden =
        tape.relu(tape.add(tape.matvec(use(params.cls_hidden.w), pooled), use(params.cls_hidden.b)));
    Tape::Var logits = tape.add(tape.matvec(use(params.cls_out.w), hidden), use(params.cls_out.b));
    ForwardVars out;
    out.pooled = pooled;
    out.probs = tape.softmax(logits);
    return out;
}

int argmax_lowest(const Tensor& probs) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
        if (probs.flat(i) > probs.flat(best)) best = i;
    }
    return best;
}

} // namespace

Prediction predict(const HeteroGraph& graph, const ModelParams& params, ForwardTrace* trace) {
    Tape tape;
    auto use = [&tape](const Param& p) { return tape.constant(p.value); };
    ForwardVars vars = build_forward(tape, graph, params, use, trace);
    Prediction pred;
    pred.probs = tape.value(vars.probs);
    pred.pooled = tape.value(vars.pooled);
    pred.label = argmax_lowest(pred.probs);
    return pred;
}

Tape::Var training_loss(Tape& tape, const HeteroGraph& graph, ModelParams& params, int label) {
    auto use = [&tape](Param& p) { return tape.param(p); };
    ForwardVars vars = build_forward(tape, graph, params, use, nullptr);
    return tape.cross_entropy(vars.probs, label);
}

} // namespace kgfuse
