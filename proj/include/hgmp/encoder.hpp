#pragma once

// Graph encoder.
//
//   H0     = act(X_t W_t + b_t)                       per node type t
//   H(l+1) = act(Agg(H(l) W_l) + b_l)                 l = 0..L-1, type-erased
//   z_G    = mean over nodes of H(L)
//   head   = act(z_G P1 + c1) P2 + c2                 contrastive space only
//
// Agg is symmetric-normalized sum with self loops (gcn) or single-head
// additive attention over the neighbourhood plus self (gat). Edges are
// treated as undirected; parallel edges add weight under gcn and are merged
// under gat. Gradients are hand-derived (encoder_backward / head_backward).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgmp/hetgraph.hpp"
#include "hgmp/io.hpp"
#include "hgmp/random.hpp"

namespace hgmp {

enum class Backbone { gcn, gat };
enum class Activation { relu, identity };

inline const char* to_string(Backbone b) { return b == Backbone::gcn ? "gcn" : "gat"; }
inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

inline Backbone parse_backbone(std::string_view s) {
    if (s == "gcn") return Backbone::gcn;
    if (s == "gat") return Backbone::gat;
    throw DomainError("unknown backbone '" + std::string(s) + "' (expected gcn or gat)");
}

inline Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity" || s == "linear") return Activation::identity;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}

struct EncoderConfig {
    std::size_t hidden = 64;
    std::size_t latent = 32;
    std::size_t layers = 2;
    Backbone backbone = Backbone::gcn;
    Activation activation = Activation::relu;
    double attention_slope = 0.2;  ///< LeakyReLU slope on attention scores
};

/// y = x * weight + bias; bias is 1 x out.
struct Affine {
    Matrix weight;
    Matrix bias;
};

struct MessageLayer {
    Matrix weight;
    Matrix bias;
    Matrix att_src;  ///< 1 x h, gat only
    Matrix att_dst;  ///< 1 x h, gat only
};

struct EncoderParams {
    EncoderConfig config;
    std::string schema_fingerprint;
    std::vector<std::string> node_type_names;
    std::vector<Affine> projections;  ///< per node type, d_t x h
    std::vector<MessageLayer> layers;
    Affine head_hidden;  ///< h x h
    Affine head_out;     ///< h x p
    bool frozen = false;
};

/// Visits every trainable array with a stable name, in a fixed order.
template <class P, class F>
    requires std::same_as<std::remove_const_t<P>, EncoderParams>
void for_each_param(P& p, F&& f) {
    for (std::size_t t = 0; t < p.projections.size(); ++t) {
        const std::string base = "proj." + p.node_type_names[t];
        f(base + ".weight", p.projections[t].weight);
        f(base + ".bias", p.projections[t].bias);
    }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const std::string base = "layer." + std::to_string(l);
        f(base + ".weight", p.layers[l].weight);
        f(base + ".bias", p.layers[l].bias);
        if (p.config.backbone == Backbone::gat) {
            f(base + ".att_src", p.layers[l].att_src);
            f(base + ".att_dst", p.layers[l].att_dst);
        }
    }
    f(std::string("head.0.weight"), p.head_hidden.weight);
    f(std::string("head.0.bias"), p.head_hidden.bias);
    f(std::string("head.1.weight"), p.head_out.weight);
    f(std::string("head.1.bias"), p.head_out.bias);
}

/// Same shapes, all zeros, unfrozen. Used as a gradient accumulator.
inline EncoderParams zeros_like(const EncoderParams& p) {
    EncoderParams z = p;
    z.frozen = false;
    for_each_param(z, [](const std::string&, Matrix& m) { m.setZero(); });
    return z;
}

namespace detail {

inline Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-a, a);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

inline Affine make_affine(std::size_t in, std::size_t out, Rng& rng) {
    return {glorot(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out), rng),
            Matrix::Zero(1, static_cast<Eigen::Index>(out))};
}

inline Matrix activate(const Matrix& pre, Activation a) {
    return a == Activation::relu ? Matrix(pre.cwiseMax(0.0)) : pre;
}

/// grad * act'(pre)
inline Matrix activation_backward(const Matrix& pre, const Matrix& grad, Activation a) {
    if (a == Activation::identity) return grad;
    return (pre.array() > 0.0).select(grad, 0.0);
}

}  // namespace detail

inline EncoderParams init_encoder(const Schema& schema, const EncoderConfig& cfg, std::uint64_t seed) {
    if (cfg.hidden < 1 || cfg.layers < 1) throw DomainError("encoder needs hidden >= 1 and layers >= 1");
    if (cfg.latent < 1 || cfg.latent > cfg.hidden) throw DomainError("encoder latent size must lie in [1, hidden]");
    EncoderParams p;
    p.config = cfg;
    p.schema_fingerprint = schema_fingerprint(schema);
    Rng rng = make_rng(seed);
    for (const auto& t : schema.node_types) {
        p.node_type_names.push_back(t.name);
        p.projections.push_back(detail::make_affine(t.dim, cfg.hidden, rng));
    }
    const auto h = static_cast<Eigen::Index>(cfg.hidden);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        MessageLayer layer;
        layer.weight = detail::glorot(h, h, rng);
        layer.bias = Matrix::Zero(1, h);
        if (cfg.backbone == Backbone::gat) {
            layer.att_src = detail::glorot(1, h, rng);
            layer.att_dst = detail::glorot(1, h, rng);
        }
        p.layers.push_back(std::move(layer));
    }
    p.head_hidden = detail::make_affine(cfg.hidden, cfg.hidden, rng);
    p.head_out = detail::make_affine(cfg.hidden, cfg.latent, rng);
    return p;
}

inline EncoderParams freeze(EncoderParams p) {
    p.frozen = true;
    return p;
}

/// Type-erased neighbourhoods (self included) in CSR form.
struct GraphStructure {
    std::vector<std::size_t> offsets;  ///< global id of the first node of each type
    std::size_t num_nodes = 0;
    std::vector<std::size_t> row_start;
    std::vector<std::size_t> col;
    std::vector<double> norm;  ///< symmetric-normalized gcn weight per entry
};

inline GraphStructure build_structure(const HetGraph& g) {
    GraphStructure s;
    s.offsets = node_offsets(g);
    const std::size_t n = s.offsets.back();
    s.num_nodes = n;
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    for (std::size_t i = 0; i < n; ++i) adj[i].push_back({i, 1.0});
    for (std::size_t et = 0; et < g.num_edge_types(); ++et) {
        const auto& decl = g.schema.edge_types[et];
        for (const auto& e : g.edges[et]) {
            const std::size_t u = s.offsets[decl.src] + e.src, v = s.offsets[decl.dst] + e.dst;
            adj[u].push_back({v, 1.0});
            if (u != v) adj[v].push_back({u, 1.0});
        }
    }
    std::vector<double> degree(n, 0.0);
    s.row_start.push_back(0);
    std::vector<double> weight;
    for (std::size_t i = 0; i < n; ++i) {
        auto& list = adj[i];
        std::sort(list.begin(), list.end());
        for (std::size_t k = 0; k < list.size(); ++k) {
            degree[i] += list[k].second;
            if (s.col.size() > s.row_start.back() && s.col.back() == list[k].first) {
                weight.back() += list[k].second;
            } else {
                s.col.push_back(list[k].first);
                weight.push_back(list[k].second);
            }
        }
        s.row_start.push_back(s.col.size());
    }
    s.norm.resize(s.col.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = s.row_start[i]; k < s.row_start[i + 1]; ++k)
            s.norm[k] = weight[k] / std::sqrt(degree[i] * degree[s.col[k]]);
    return s;
}

using StructurePtr = std::shared_ptr<const GraphStructure>;

inline StructurePtr share_structure(const HetGraph& g) {
    return std::make_shared<const GraphStructure>(build_structure(g));
}

struct EncoderTrace {
    StructurePtr structure;
    std::vector<Matrix> inputs;        ///< per-type features fed to the projection
    Matrix projected;                  ///< pre-activation of H0
    std::vector<Matrix> hidden;        ///< H0..HL
    std::vector<Matrix> transformed;   ///< H(l) W_l
    std::vector<Matrix> aggregated;    ///< pre-activation of H(l+1)
    std::vector<std::vector<double>> attention;  ///< gat: alpha per CSR entry
    std::vector<std::vector<double>> scores;     ///< gat: pre-LeakyReLU score per CSR entry
    RowVector z;
};

struct GraphEmbedding {
    RowVector z;
    Matrix node_states;
};

inline void check_features(std::span<const Matrix> features, const EncoderParams& p) {
    if (features.size() != p.projections.size())
        throw ConfigError("schema mismatch: graph has " + std::to_string(features.size()) +
                          " node types, encoder expects " + std::to_string(p.projections.size()));
    for (std::size_t t = 0; t < features.size(); ++t)
        if (features[t].cols() != p.projections[t].weight.rows())
            throw ConfigError("schema mismatch: node type '" + p.node_type_names[t] + "' has dim " +
                              std::to_string(features[t].cols()) + ", encoder expects " +
                              std::to_string(p.projections[t].weight.rows()));
}

inline EncoderTrace encoder_forward(StructurePtr structure, std::span<const Matrix> features,
                                    const EncoderParams& p) {
    check_features(features, p);
    const auto& cfg = p.config;
    const auto n = static_cast<Eigen::Index>(structure->num_nodes);
    if (n == 0) throw DomainError("cannot encode a graph with no nodes");
    const auto h = static_cast<Eigen::Index>(cfg.hidden);

    EncoderTrace tr;
    tr.inputs.assign(features.begin(), features.end());
    tr.projected.resize(n, h);
    for (std::size_t t = 0; t < features.size(); ++t) {
        const auto rows = features[t].rows();
        if (rows == 0) continue;
        tr.projected.middleRows(static_cast<Eigen::Index>(structure->offsets[t]), rows) =
            (features[t] * p.projections[t].weight).rowwise() + p.projections[t].bias.row(0);
    }
    tr.hidden.push_back(detail::activate(tr.projected, cfg.activation));

    const auto& s = *structure;
    for (const auto& layer : p.layers) {
        Matrix y = tr.hidden.back() * layer.weight;
        Matrix agg = Matrix::Zero(n, h);
        if (cfg.backbone == Backbone::gcn) {
            for (Eigen::Index i = 0; i < n; ++i)
                for (std::size_t k = s.row_start[i]; k < s.row_start[i + 1]; ++k)
                    agg.row(i) += s.norm[k] * y.row(static_cast<Eigen::Index>(s.col[k]));
            tr.attention.emplace_back();
            tr.scores.emplace_back();
        } else {
            const Eigen::VectorXd sd = y * layer.att_dst.transpose();
            const Eigen::VectorXd ss = y * layer.att_src.transpose();
            std::vector<double> alpha(s.col.size()), score(s.col.size());
            for (Eigen::Index i = 0; i < n; ++i) {
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t k = s.row_start[i]; k < s.row_start[i + 1]; ++k) {
                    score[k] = sd(i) + ss(static_cast<Eigen::Index>(s.col[k]));
                    const double e = score[k] > 0.0 ? score[k] : cfg.attention_slope * score[k];
                    alpha[k] = e;
                    mx = std::max(mx, e);
                }
                double sum = 0.0;
                for (std::size_t k = s.row_start[i]; k < s.row_start[i + 1]; ++k) {
                    alpha[k] = std::exp(alpha[k] - mx);
                    sum += alpha[k];
                }
                for (std::size_t k = s.row_start[i]; k < s.row_start[i + 1]; ++k) {
                    alpha[k] /= sum;
                    agg.row(i) += alpha[k] * y.row(static_cast<Eigen::Index>(s.col[k]));
                }
            }
            tr.attention.push_back(std::move(alpha));
            tr.scores.push_back(std::move(score));
        }
        agg.rowwise() += layer.bias.row(0);
        tr.transformed.push_back(std::move(y));
        tr.hidden.push_back(detail::activate(agg, cfg.activation));
        tr.aggregated.push_back(std::move(agg));
    }
    tr.z = tr.hidden.back().colwise().mean();
    tr.structure = std::move(structure);
    return tr;
}

inline EncoderTrace encoder_forward(const HetGraph& g, const EncoderParams& p) {
    return encoder_forward(share_structure(g), g.features, p);
}

inline GraphEmbedding encode_graph(const HetGraph& g, const EncoderParams& p) {
    auto tr = encoder_forward(g, p);
    return {std::move(tr.z), std::move(tr.hidden.back())};
}

/// Backpropagates dL/dz_G. Accumulates parameter gradients into `grad` and
/// writes per-type input-feature gradients into `dinputs`; either may be null.
inline void encoder_backward(const EncoderTrace& tr, const EncoderParams& p, const RowVector& dz,
                             EncoderParams* grad, std::vector<Matrix>* dinputs) {
    const auto& cfg = p.config;
    const auto& s = *tr.structure;
    const auto n = static_cast<Eigen::Index>(s.num_nodes);
    Matrix dh = dz.replicate(n, 1) / static_cast<double>(n);

    for (std::size_t li = p.layers.size(); li-- > 0;) {
        const auto& layer = p.layers[li];
        const Matrix da = detail::activation_backward(tr.aggregated[li], dh, cfg.activation);
        const Matrix& y = tr.transformed[li];
        Matrix dy = Matrix::Zero(y.rows(), y.cols());
        if (cfg.backbone == Backbone::gcn) {
            for (Eigen::Index i = 0; i < n; ++i)
                for (std::size_t k = s.row_start[i]; k < s.row_start[i + 1]; ++k)
                    dy.row(static_cast<Eigen::Index>(s.col[k])) += s.norm[k] * da.row(i);
        } else {
            const auto& alpha = tr.attention[li];
            const auto& score = tr.scores[li];
            Eigen::VectorXd dsd = Eigen::VectorXd::Zero(n), dss = Eigen::VectorXd::Zero(n);
            std::vector<double> dalpha;
            for (Eigen::Index i = 0; i < n; ++i) {
                const std::size_t b = s.row_start[i], e = s.row_start[i + 1];
                dalpha.assign(e - b, 0.0);
                double weighted = 0.0;
                for (std::size_t k = b; k < e; ++k) {
                    const auto j = static_cast<Eigen::Index>(s.col[k]);
                    dy.row(j) += alpha[k] * da.row(i);
                    dalpha[k - b] = da.row(i).dot(y.row(j));
                    weighted += alpha[k] * dalpha[k - b];
                }
                for (std::size_t k = b; k < e; ++k) {
                    const double de = alpha[k] * (dalpha[k - b] - weighted);
                    const double du = score[k] > 0.0 ? de : cfg.attention_slope * de;
                    dsd(i) += du;
                    dss(static_cast<Eigen::Index>(s.col[k])) += du;
                }
            }
            dy.noalias() += dsd * layer.att_dst + dss * layer.att_src;
            if (grad) {
                grad->layers[li].att_dst.noalias() += dsd.transpose() * y;
                grad->layers[li].att_src.noalias() += dss.transpose() * y;
            }
        }
        if (grad) {
            grad->layers[li].bias += da.colwise().sum();
            grad->layers[li].weight.noalias() += tr.hidden[li].transpose() * dy;
        }
        dh = dy * layer.weight.transpose();
    }

    const Matrix dp = detail::activation_backward(tr.projected, dh, cfg.activation);
    if (dinputs) dinputs->assign(tr.inputs.size(), Matrix{});
    for (std::size_t t = 0; t < tr.inputs.size(); ++t) {
        const auto rows = tr.inputs[t].rows();
        const auto block = dp.middleRows(static_cast<Eigen::Index>(s.offsets[t]), rows);
        if (grad && rows > 0) {
            grad->projections[t].weight.noalias() += tr.inputs[t].transpose() * block;
            grad->projections[t].bias += block.colwise().sum();
        }
        if (dinputs) (*dinputs)[t] = block * p.projections[t].weight.transpose();
    }
}

struct HeadTrace {
    RowVector input;
    RowVector pre;
    RowVector mid;
    RowVector out;
};

inline HeadTrace head_forward(const RowVector& z, const EncoderParams& p) {
    HeadTrace t;
    t.input = z;
    t.pre = z * p.head_hidden.weight + p.head_hidden.bias;
    t.mid = detail::activate(t.pre, p.config.activation);
    t.out = t.mid * p.head_out.weight + p.head_out.bias;
    return t;
}

/// Two affine maps with one nonlinearity between; h -> h -> p.
inline RowVector project_head(const RowVector& z, const EncoderParams& p) { return head_forward(z, p).out; }

/// Returns dL/dz; accumulates head gradients into `grad` when non-null.
inline RowVector head_backward(const HeadTrace& t, const EncoderParams& p, const RowVector& dout,
                               EncoderParams* grad) {
    if (grad) {
        grad->head_out.weight.noalias() += t.mid.transpose() * dout;
        grad->head_out.bias += dout;
    }
    const RowVector dmid = dout * p.head_out.weight.transpose();
    const RowVector dpre = detail::activation_backward(t.pre, dmid, p.config.activation);
    if (grad) {
        grad->head_hidden.weight.noalias() += t.input.transpose() * dpre;
        grad->head_hidden.bias += dpre;
    }
    return dpre * p.head_hidden.weight.transpose();
}

// ---------------------------------------------------------------------------
// checkpoints

namespace detail {

inline nlohmann::json matrix_json(const std::string& name, const Matrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return {{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", data}};
}

inline void fill_matrix(const nlohmann::json& j, Matrix& m, const std::string& where) {
    const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols() ||
        static_cast<Eigen::Index>(data.size()) != m.size())
        throw IoError(where + ": shape mismatch for '" + j.value("name", std::string{}) + "'");
    std::copy(data.begin(), data.end(), m.data());
}

}  // namespace detail

/// Container: {"format", "backbone", "schema_fingerprint", "frozen", "config",
/// "node_types", "params": [{"name", "shape": [rows, cols], "data": [...]}]}.
/// Data are row-major and written in shortest round-trip form.
inline nlohmann::json encoder_to_json(const EncoderParams& p) {
    nlohmann::json j;
    j["format"] = "hgmp-encoder/1";
    j["backbone"] = to_string(p.config.backbone);
    j["schema_fingerprint"] = p.schema_fingerprint;
    j["frozen"] = p.frozen;
    j["config"] = {{"hidden", p.config.hidden},
                   {"latent", p.config.latent},
                   {"layers", p.config.layers},
                   {"activation", to_string(p.config.activation)},
                   {"attention_slope", p.config.attention_slope}};
    j["node_types"] = p.node_type_names;
    j["params"] = nlohmann::json::array();
    for_each_param(p, [&](const std::string& name, const Matrix& m) { j["params"].push_back(detail::matrix_json(name, m)); });
    return j;
}

inline std::string encoder_bytes(const EncoderParams& p) { return encoder_to_json(p).dump(); }

inline void save_encoder(const EncoderParams& p, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    detail::write_text(path, encoder_to_json(p).dump(1) + "\n");
}

/// Rebuilds parameters from a checkpoint. When `expected` is given, the stored
/// schema fingerprint must match it.
inline EncoderParams encoder_from_json(const nlohmann::json& j, const Schema* expected, const std::string& where) {
    try {
        if (j.at("format") != "hgmp-encoder/1") throw IoError(where + ": not an encoder checkpoint");
        const std::string fp = j.at("schema_fingerprint").get<std::string>();
        if (expected && fp != schema_fingerprint(*expected))
            throw ConfigError(where + ": schema fingerprint " + fp + " does not match dataset schema " +
                              schema_fingerprint(*expected));
        EncoderParams p;
        p.config.backbone = parse_backbone(j.at("backbone").get<std::string>());
        const auto& c = j.at("config");
        p.config.hidden = c.at("hidden").get<std::size_t>();
        p.config.latent = c.at("latent").get<std::size_t>();
        p.config.layers = c.at("layers").get<std::size_t>();
        p.config.activation = parse_activation(c.at("activation").get<std::string>());
        p.config.attention_slope = c.value("attention_slope", 0.2);
        p.schema_fingerprint = fp;
        p.frozen = j.at("frozen").get<bool>();
        p.node_type_names = j.at("node_types").get<std::vector<std::string>>();

        // Shapes are implied by the config and the stored projection widths.
        std::map<std::string, const nlohmann::json*> by_name;
        for (const auto& e : j.at("params")) by_name[e.at("name").get<std::string>()] = &e;
        const auto h = static_cast<Eigen::Index>(p.config.hidden);
        for (const auto& name : p.node_type_names) {
            const auto it = by_name.find("proj." + name + ".weight");
            if (it == by_name.end()) throw IoError(where + ": missing projection for '" + name + "'");
            const auto d = it->second->at("shape")[0].get<Eigen::Index>();
            p.projections.push_back({Matrix(d, h), Matrix(1, h)});
        }
        for (std::size_t l = 0; l < p.config.layers; ++l) {
            MessageLayer layer{Matrix(h, h), Matrix(1, h), Matrix(), Matrix()};
            if (p.config.backbone == Backbone::gat) {
                layer.att_src.resize(1, h);
                layer.att_dst.resize(1, h);
            }
            p.layers.push_back(std::move(layer));
        }
        p.head_hidden = {Matrix(h, h), Matrix(1, h)};
        p.head_out = {Matrix(h, static_cast<Eigen::Index>(p.config.latent)),
                      Matrix(1, static_cast<Eigen::Index>(p.config.latent))};
        for_each_param(p, [&](const std::string& name, Matrix& m) {
            const auto it = by_name.find(name);
            if (it == by_name.end()) throw IoError(where + ": missing parameter '" + name + "'");
            detail::fill_matrix(*it->second, m, where);
        });
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(where + ": malformed encoder checkpoint: " + e.what());
    }
}

inline EncoderParams load_encoder(const fs::path& path, const Schema* expected = nullptr) {
    return encoder_from_json(detail::read_json(path), expected, path.string());
}

}  // namespace hgmp
