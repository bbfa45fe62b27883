#pragma once

#include "acewgs/corpus_store.hpp"
#include "acewgs/error.hpp"
#include "acewgs/thermo_equilibrium.hpp"

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace acewgs {

// ---------------------------------------------------------------------------
// Catalog of categorical choices

struct CatalogEntry {
    std::string id;
    std::string name;
};

enum class CatalogKind { BaseMetal, Support, Promoter, PrepMethod };

struct Catalog {
    std::vector<CatalogEntry> base_metals;
    std::vector<CatalogEntry> supports;
    std::vector<CatalogEntry> promoters;
    std::vector<CatalogEntry> prep_methods;

    const std::vector<CatalogEntry>& list(CatalogKind kind) const {
        switch (kind) {
        case CatalogKind::BaseMetal: return base_metals;
        case CatalogKind::Support: return supports;
        case CatalogKind::Promoter: return promoters;
        case CatalogKind::PrepMethod: return prep_methods;
        }
        return base_metals;
    }

    std::vector<CatalogEntry>& list(CatalogKind kind) {
        return const_cast<std::vector<CatalogEntry>&>(std::as_const(*this).list(kind));
    }

    const CatalogEntry* find(CatalogKind kind, std::string_view id) const {
        for (const auto& e : list(kind)) {
            if (e.id == id) {
                return &e;
            }
        }
        return nullptr;
    }

    bool contains(CatalogKind kind, std::string_view id) const { return find(kind, id) != nullptr; }

    /// Display name, or the id itself when unknown.
    std::string display(CatalogKind kind, std::string_view id) const {
        auto e = find(kind, id);
        return e ? e->name : std::string(id);
    }
};

inline constexpr std::string_view catalog_key(CatalogKind kind) {
    switch (kind) {
    case CatalogKind::BaseMetal: return "base_metals";
    case CatalogKind::Support: return "supports";
    case CatalogKind::Promoter: return "promoters";
    case CatalogKind::PrepMethod: return "prep_methods";
    }
    return "";
}

inline constexpr CatalogKind kCatalogKinds[] = {CatalogKind::BaseMetal, CatalogKind::Support, CatalogKind::Promoter,
                                                CatalogKind::PrepMethod};

/// Arrays of tables `[[base_metals]] id = "Pt" name = "Pt"`, same for
/// supports, promoters and prep_methods.
inline Catalog parse_catalog(std::string_view toml_text, std::string_view source = "catalog") {
    toml::table doc;
    try {
        doc = toml::parse(toml_text, source);
    } catch (const toml::parse_error& e) {
        throw Error(Errc::ConfigError, std::string(source) + ": " + std::string(e.description()));
    }
    Catalog catalog;
    for (auto kind : kCatalogKinds) {
        auto key = catalog_key(kind);
        auto* arr = doc[key].as_array();
        if (!arr) {
            throw Error(Errc::ConfigError, std::string(source) + ": missing array [[" + std::string(key) + "]]");
        }
        auto& out = catalog.list(kind);
        for (auto& node : *arr) {
            auto* tbl = node.as_table();
            auto id = tbl ? (*tbl)["id"].value<std::string>() : std::nullopt;
            if (!id || id->empty()) {
                throw Error(Errc::ConfigError, std::string(source) + ": entry in " + std::string(key) + " lacks id");
            }
            if (std::any_of(out.begin(), out.end(), [&](const CatalogEntry& e) { return e.id == *id; })) {
                throw Error(Errc::ConfigError, std::string(source) + ": duplicate id " + *id + " in " + std::string(key));
            }
            out.push_back({*id, (*tbl)["name"].value_or(*id)});
        }
    }
    return catalog;
}

inline Catalog load_catalog(const std::filesystem::path& path) {
    return parse_catalog(read_file(path), path.string());
}

inline nlohmann::json to_json(const Catalog& catalog) {
    nlohmann::json j = nlohmann::json::object();
    for (auto kind : kCatalogKinds) {
        auto& arr = j[std::string(catalog_key(kind))] = nlohmann::json::array();
        for (const auto& e : catalog.list(kind)) {
            arr.push_back({{"id", e.id}, {"name", e.name}});
        }
    }
    return j;
}

// ---------------------------------------------------------------------------
// Designs

struct Component {
    std::string id;
    double wt_pct = 0.0;

    bool operator==(const Component&) const = default;
};

struct CatalystDesign {
    Component base;
    std::optional<Component> promoter;
    std::string support;
    std::string prep_method;
    Celsius temperature;
    FeedComposition feed;
    double time_on_stream_h = 1.0;
    /// Catalyst weight over feed flow, mg·min/ml.
    double w_f_ratio = 1.0;

    double promoter_wt() const noexcept { return promoter ? promoter->wt_pct : 0.0; }
    double support_wt() const noexcept { return 100.0 - base.wt_pct - promoter_wt(); }

    void validate() const {
        if (!(base.wt_pct >= 0.0) || !(promoter_wt() >= 0.0)) {
            throw Error(Errc::InvalidDesign, "weight percentages must be non-negative");
        }
        if (base.wt_pct + promoter_wt() > 100.0 + 1e-9) {
            throw Error(Errc::InvalidDesign, "base + promoter exceed 100 wt%");
        }
        if (!(time_on_stream_h >= 0.0) || !(w_f_ratio >= 0.0)) {
            throw Error(Errc::InvalidDesign, "time on stream and W/F must be non-negative");
        }
        feed.validate();
    }
};

struct Prediction {
    /// Predicted CO conversion, %.
    double conversion = 0.0;
    /// Ensemble population standard deviation, %.
    double uncertainty = 0.0;
    /// Thermodynamic equilibrium conversion, %.
    double x_eq = 0.0;
};

// ---------------------------------------------------------------------------
// Networks

enum class Activation { Relu, Linear };

inline std::string_view activation_name(Activation a) { return a == Activation::Relu ? "relu" : "linear"; }

struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    /// Row-major, outputs x inputs.
    std::vector<double> weights;
    std::vector<double> bias;
    Activation activation = Activation::Linear;
};

struct Network {
    std::vector<DenseLayer> layers;

    double forward(std::span<const double> input) const {
        std::vector<double> current(input.begin(), input.end());
        std::vector<double> next;
        for (const auto& layer : layers) {
            next.assign(layer.outputs, 0.0);
            for (std::size_t o = 0; o < layer.outputs; ++o) {
                const double* row = layer.weights.data() + o * layer.inputs;
                double acc = layer.bias[o];
                for (std::size_t i = 0; i < layer.inputs; ++i) {
                    acc += row[i] * current[i];
                }
                next[o] = layer.activation == Activation::Relu ? std::max(0.0, acc) : acc;
            }
            current.swap(next);
        }
        return current.front();
    }
};

struct ModelBundle {
    std::string name;
    std::vector<std::string> feature_schema;
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<Network> ensemble;

    void validate() const {
        const std::size_t n = feature_schema.size();
        if (n == 0) {
            throw Error(Errc::FormatError, "empty feature schema");
        }
        if (mean.size() != n || stddev.size() != n) {
            throw Error(Errc::FormatError, "normalization length differs from feature schema");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!(stddev[i] > 0.0) || !std::isfinite(stddev[i]) || !std::isfinite(mean[i])) {
                throw Error(Errc::FormatError, "feature " + feature_schema[i] + " has std <= 0 or non-finite stats");
            }
        }
        if (ensemble.empty()) {
            throw Error(Errc::FormatError, "ensemble has no members");
        }
        for (std::size_t m = 0; m < ensemble.size(); ++m) {
            const auto& layers = ensemble[m].layers;
            if (layers.empty()) {
                throw Error(Errc::FormatError, "member " + std::to_string(m) + " has no layers");
            }
            std::size_t expected = n;
            for (std::size_t l = 0; l < layers.size(); ++l) {
                const auto& layer = layers[l];
                if (layer.inputs != expected) {
                    throw Error(Errc::DimensionChainBroken, "member " + std::to_string(m) + " layer " +
                                                                std::to_string(l) + " expects " +
                                                                std::to_string(layer.inputs) + " inputs, previous gives " +
                                                                std::to_string(expected));
                }
                if (layer.weights.size() != layer.inputs * layer.outputs || layer.bias.size() != layer.outputs ||
                    layer.outputs == 0) {
                    throw Error(Errc::FormatError, "member " + std::to_string(m) + " layer " + std::to_string(l) +
                                                       " has inconsistent weight/bias sizes");
                }
                expected = layer.outputs;
            }
            if (expected != 1) {
                throw Error(Errc::DimensionChainBroken, "member " + std::to_string(m) + " must end in one output");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Encoding

namespace feature {
inline constexpr std::string_view kBasePrefix = "base:";
inline constexpr std::string_view kPromoterPrefix = "promoter:";
inline constexpr std::string_view kSupportPrefix = "support:";
inline constexpr std::string_view kPrepPrefix = "prep:";
inline constexpr std::string_view kTemperature = "cond:temperature_c";
inline constexpr std::string_view kCo = "cond:co_pct";
inline constexpr std::string_view kH2o = "cond:h2o_pct";
inline constexpr std::string_view kCo2 = "cond:co2_pct";
inline constexpr std::string_view kH2 = "cond:h2_pct";
inline constexpr std::string_view kN2 = "cond:n2_pct";
inline constexpr std::string_view kTimeOnStream = "cond:time_on_stream_h";
inline constexpr std::string_view kWfRatio = "cond:w_f_ratio";

inline constexpr std::string_view kConditions[] = {kTemperature, kCo, kH2o, kCo2, kH2, kN2, kTimeOnStream, kWfRatio};
} // namespace feature

/// Feature values before normalization: wt% in composition slots, 1 for the
/// chosen preparation method, reaction conditions (feed in vol%).
inline std::vector<double> encode_raw(const CatalystDesign& design, std::span<const std::string> schema) {
    std::vector<double> x(schema.size(), 0.0);
    std::map<std::string, std::size_t, std::less<>> slot;
    for (std::size_t i = 0; i < schema.size(); ++i) {
        slot.emplace(schema[i], i);
    }
    auto set = [&](std::string_view prefix, std::string_view id, double value) {
        auto it = slot.find(std::string(prefix) + std::string(id));
        if (it == slot.end()) {
            throw Error(Errc::UnknownCatalogId, "'" + std::string(id) + "' has no " +
                                                    std::string(prefix.substr(0, prefix.size() - 1)) +
                                                    " slot in the model schema");
        }
        x[it->second] = value;
    };
    set(feature::kBasePrefix, design.base.id, design.base.wt_pct);
    if (design.promoter) {
        set(feature::kPromoterPrefix, design.promoter->id, design.promoter->wt_pct);
    }
    set(feature::kSupportPrefix, design.support, design.support_wt());
    set(feature::kPrepPrefix, design.prep_method, 1.0);

    const double conditions[] = {design.temperature.value, 100.0 * design.feed.y_co, 100.0 * design.feed.y_h2o,
                                 100.0 * design.feed.y_co2, 100.0 * design.feed.y_h2, 100.0 * design.feed.y_n2,
                                 design.time_on_stream_h,   design.w_f_ratio};
    for (std::size_t c = 0; c < std::size(feature::kConditions); ++c) {
        auto it = slot.find(feature::kConditions[c]);
        if (it == slot.end()) {
            throw Error(Errc::SchemaMismatch, "model schema lacks " + std::string(feature::kConditions[c]));
        }
        x[it->second] = conditions[c];
    }
    return x;
}

inline std::vector<double> normalize(std::vector<double> raw, const ModelBundle& bundle) {
    if (raw.size() != bundle.feature_schema.size()) {
        throw Error(Errc::SchemaMismatch, "feature vector length differs from schema");
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
        raw[i] = (raw[i] - bundle.mean[i]) / bundle.stddev[i];
    }
    return raw;
}

inline std::vector<double> encode(const CatalystDesign& design, const ModelBundle& bundle) {
    return normalize(encode_raw(design, bundle.feature_schema), bundle);
}

// ---------------------------------------------------------------------------
// Prediction

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Raw logit of every ensemble member for an encoded input.
inline std::vector<double> member_logits(std::span<const double> input, const ModelBundle& bundle) {
    std::vector<double> z;
    z.reserve(bundle.ensemble.size());
    for (const auto& net : bundle.ensemble) {
        double v = net.forward(input);
        if (std::isnan(v)) {
            throw Error(Errc::NonFiniteActivation, "network produced NaN");
        }
        z.push_back(v);
    }
    return z;
}

/// Mean and population standard deviation of member conversions, each
/// x_eq * sigmoid(z_i), so no member can exceed equilibrium.
inline Prediction aggregate(std::span<const double> logits, double x_eq_pct) {
    std::vector<double> c;
    c.reserve(logits.size());
    for (double z : logits) {
        c.push_back(x_eq_pct * sigmoid(z));
    }
    Prediction p;
    p.x_eq = x_eq_pct;
    if (std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); })) {
        p.conversion = c.front();
        p.uncertainty = 0.0;
        return p;
    }
    double sum = 0.0;
    for (double v : c) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(c.size());
    double ss = 0.0;
    for (double v : c) {
        ss += (v - mean) * (v - mean);
    }
    p.conversion = std::clamp(mean, 0.0, x_eq_pct);
    p.uncertainty = std::sqrt(ss / static_cast<double>(c.size()));
    return p;
}

inline Prediction predict(const CatalystDesign& design, const ModelBundle& bundle) {
    design.validate();
    const auto input = encode(design, bundle);
    const auto eq = equilibrium_conversion(design.feed, design.temperature);
    return aggregate(member_logits(input, bundle), 100.0 * eq.x_eq);
}

// ---------------------------------------------------------------------------
// Bundle file: JSON header, weights as base64 little-endian f64 blobs

namespace bundle_detail {

inline std::string encode_doubles(std::span<const double> values) {
    using namespace boost::archive::iterators;
    using Encoder = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
    std::string bytes;
    bytes.reserve(values.size() * 8);
    for (double v : values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
        }
    }
    std::string out(Encoder(bytes.cbegin()), Encoder(bytes.cend()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

inline std::vector<double> decode_doubles(std::string_view text, std::size_t expected, const std::string& what) {
    using namespace boost::archive::iterators;
    using Decoder = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
    std::string b64(text);
    std::size_t pad = 0;
    while (!b64.empty() && b64.back() == '=') {
        b64.pop_back();
        ++pad;
    }
    if (pad > 2 || (b64.size() + pad) % 4 != 0) {
        throw Error(Errc::FormatError, what + ": malformed base64");
    }
    std::string bytes;
    try {
        bytes.assign(Decoder(b64.cbegin()), Decoder(b64.cend()));
    } catch (const std::exception&) {
        throw Error(Errc::FormatError, what + ": malformed base64");
    }
    if (bytes.size() != expected * 8) {
        throw Error(Errc::FormatError, what + ": expected " + std::to_string(expected) + " doubles, got " +
                                           std::to_string(bytes.size()) + " bytes");
    }
    std::vector<double> out(expected);
    for (std::size_t k = 0; k < expected; ++k) {
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[k * 8 + i])) << (8 * i);
        }
        out[k] = std::bit_cast<double>(bits);
    }
    return out;
}

} // namespace bundle_detail

inline constexpr std::string_view kBundleFormat = "acewgs-model-bundle";
inline constexpr int kBundleVersion = 1;

inline nlohmann::json bundle_to_json(const ModelBundle& bundle) {
    using bundle_detail::encode_doubles;
    nlohmann::json members = nlohmann::json::array();
    for (const auto& net : bundle.ensemble) {
        nlohmann::json layers = nlohmann::json::array();
        for (const auto& l : net.layers) {
            layers.push_back({{"inputs", l.inputs},
                              {"outputs", l.outputs},
                              {"activation", activation_name(l.activation)},
                              {"weights", encode_doubles(l.weights)},
                              {"bias", encode_doubles(l.bias)}});
        }
        members.push_back({{"layers", layers}});
    }
    return {{"format", kBundleFormat},
            {"version", kBundleVersion},
            {"name", bundle.name},
            {"feature_schema", bundle.feature_schema},
            {"normalization", {{"mean", encode_doubles(bundle.mean)}, {"std", encode_doubles(bundle.stddev)}}},
            {"ensemble", members}};
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
    using bundle_detail::decode_doubles;
    ModelBundle b;
    try {
        if (j.at("format").get<std::string>() != kBundleFormat) {
            throw Error(Errc::FormatError, "not a model bundle");
        }
        if (j.at("version").get<int>() != kBundleVersion) {
            throw Error(Errc::FormatError, "unsupported bundle version");
        }
        b.name = j.value("name", "");
        b.feature_schema = j.at("feature_schema").get<std::vector<std::string>>();
        const auto n = b.feature_schema.size();
        b.mean = decode_doubles(j.at("normalization").at("mean").get<std::string>(), n, "normalization.mean");
        b.stddev = decode_doubles(j.at("normalization").at("std").get<std::string>(), n, "normalization.std");
        for (const auto& m : j.at("ensemble")) {
            Network net;
            for (const auto& l : m.at("layers")) {
                DenseLayer layer;
                layer.inputs = l.at("inputs").get<std::size_t>();
                layer.outputs = l.at("outputs").get<std::size_t>();
                auto act = l.at("activation").get<std::string>();
                if (act == "relu") {
                    layer.activation = Activation::Relu;
                } else if (act == "linear") {
                    layer.activation = Activation::Linear;
                } else {
                    throw Error(Errc::FormatError, "unknown activation " + act);
                }
                layer.weights = decode_doubles(l.at("weights").get<std::string>(), layer.inputs * layer.outputs,
                                               "weights");
                layer.bias = decode_doubles(l.at("bias").get<std::string>(), layer.outputs, "bias");
                net.layers.push_back(std::move(layer));
            }
            b.ensemble.push_back(std::move(net));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::FormatError, std::string("bundle JSON: ") + e.what());
    }
    b.validate();
    return b;
}

inline ModelBundle load_bundle(const std::filesystem::path& path) {
    auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) {
        throw Error(Errc::FormatError, path.string() + " is not valid JSON");
    }
    return bundle_from_json(j);
}

inline void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
    bundle.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(Errc::IoError, "cannot write " + path.string());
    }
    out << bundle_to_json(bundle).dump(2) << '\n';
}

} // namespace acewgs
