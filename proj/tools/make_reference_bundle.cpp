// Writes the reference surrogate bundle: a small fixed-seed ensemble over the
// catalog's feature schema. Its weights are synthetic, not trained.

#include <acewgs/surrogate_model.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <random>

namespace {

struct Stats {
    double mean;
    double stddev;
};

acewgs::ModelBundle make_bundle(const acewgs::Catalog& catalog, std::uint64_t seed, std::size_t members,
                                std::size_t hidden) {
    using namespace acewgs;
    ModelBundle b;
    b.name = "acewgs-reference-synthetic";
    auto add = [&](std::string name, Stats s) {
        b.feature_schema.push_back(std::move(name));
        b.mean.push_back(s.mean);
        b.stddev.push_back(s.stddev);
    };
    for (const auto& e : catalog.base_metals) {
        add(std::string(feature::kBasePrefix) + e.id, {1.0, 3.0});
    }
    for (const auto& e : catalog.promoters) {
        add(std::string(feature::kPromoterPrefix) + e.id, {0.5, 2.0});
    }
    for (const auto& e : catalog.supports) {
        add(std::string(feature::kSupportPrefix) + e.id, {20.0, 40.0});
    }
    for (const auto& e : catalog.prep_methods) {
        add(std::string(feature::kPrepPrefix) + e.id, {0.25, 0.5});
    }
    const Stats conditions[] = {{250.0, 100.0}, {5.0, 3.0}, {20.0, 10.0}, {5.0, 3.0},
                                {20.0, 12.0},   {50.0, 25.0}, {25.0, 15.0}, {5.0, 3.0}};
    for (std::size_t c = 0; c < std::size(feature::kConditions); ++c) {
        add(std::string(feature::kConditions[c]), conditions[c]);
    }

    std::mt19937_64 rng(seed);
    auto layer = [&](std::size_t in, std::size_t out, Activation act) {
        DenseLayer l;
        l.inputs = in;
        l.outputs = out;
        l.activation = act;
        std::normal_distribution<double> w(0.0, std::sqrt(2.0 / static_cast<double>(in)));
        std::normal_distribution<double> bias(0.0, 0.1);
        l.weights.resize(in * out);
        for (auto& x : l.weights) {
            x = w(rng);
        }
        l.bias.resize(out);
        for (auto& x : l.bias) {
            x = bias(rng);
        }
        return l;
    };
    const std::size_t n = b.feature_schema.size();
    for (std::size_t m = 0; m < members; ++m) {
        Network net;
        net.layers.push_back(layer(n, hidden, Activation::Relu));
        net.layers.push_back(layer(hidden, hidden, Activation::Relu));
        net.layers.push_back(layer(hidden, 1, Activation::Linear));
        // Shift the logit so members favour high conversion.
        net.layers.back().bias[0] += 1.5;
        b.ensemble.push_back(std::move(net));
    }
    b.validate();
    return b;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Write the reference surrogate model bundle"};
    std::string catalog_path = "config/catalog.toml";
    std::string out = "models/reference.bundle.json";
    std::uint64_t seed = 20240607;
    std::size_t members = 5;
    std::size_t hidden = 16;
    app.add_option("--catalog", catalog_path, "Catalog TOML");
    app.add_option("--out", out, "Output bundle path");
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--members", members, "Ensemble size")->check(CLI::PositiveNumber);
    app.add_option("--hidden", hidden, "Hidden layer width")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);
    try {
        const auto bundle = make_bundle(acewgs::load_catalog(catalog_path), seed, members, hidden);
        acewgs::save_bundle(bundle, out);
        std::cout << out << ": " << bundle.feature_schema.size() << " features, " << bundle.ensemble.size()
                  << " members\n";
    } catch (const acewgs::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
