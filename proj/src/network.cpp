// SPDX-License-Identifier: MIT
#include "hte/network.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "hte/contractions.hpp"

namespace hte {

MlpLayout::MlpLayout(std::vector<int> sizes) : sizes_(std::move(sizes))
{
    if (sizes_.size() < 2) throw NetworkError("layer_sizes: need at least an input and an output width");
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        if (sizes_[i] < 1)
            throw NetworkError("layer_sizes[" + std::to_string(i) + "]: width must be >= 1, got " +
                               std::to_string(sizes_[i]));
    }
    if (sizes_.back() != 1) throw NetworkError("layer_sizes: output width must be 1 (scalar field)");
    std::size_t offset = 0;
    for (int l = 0; l < layers(); ++l) {
        weight_offset_.push_back(offset);
        offset += static_cast<std::size_t>(rows(l)) * static_cast<std::size_t>(cols(l));
        bias_offset_.push_back(offset);
        offset += static_cast<std::size_t>(rows(l));
    }
    count_ = offset;
}

MlpParams init_params(const std::vector<int>& layer_sizes, Engine& rng)
{
    MlpParams p{MlpLayout(layer_sizes), {}};
    p.values.assign(p.layout.parameter_count(), 0.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int l = 0; l < p.layout.layers(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(p.layout.cols(l)));
        auto w = p.weight(l);
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * normal(rng);
    }
    return p;
}

Jet boundary_factor_along(const DomainSpec& domain, std::span<const double> x, std::span<const double> v, int order)
{
    const std::vector<Jet> in = line_jets(x, v, order);
    return boundary_factor<double>(domain, in);
}

bool inside_domain(const DomainSpec& domain, std::span<const double> x)
{
    double r2 = 0.0;
    for (double xi : x) r2 += xi * xi;
    switch (domain.kind) {
    case DomainKind::unit_ball: return r2 < 1.0;
    case DomainKind::annulus_1_2: return r2 > 1.0 && r2 < 4.0;
    }
    return false;
}

std::string to_string(DomainKind kind)
{
    switch (kind) {
    case DomainKind::unit_ball: return "unit_ball";
    case DomainKind::annulus_1_2: return "annulus_1_2";
    }
    return "unknown";
}

DomainKind domain_kind_from_string(const std::string& name)
{
    if (name == "unit_ball") return DomainKind::unit_ball;
    if (name == "annulus_1_2") return DomainKind::annulus_1_2;
    throw NetworkError("unknown domain kind '" + name + "' (expected unit_ball or annulus_1_2)");
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params)
{
    nlohmann::json j;
    j["format"] = "hte-mlp-checkpoint";
    j["version"] = 1;
    j["layer_sizes"] = params.layout.sizes();
    nlohmann::json layers = nlohmann::json::array();
    for (int l = 0; l < params.layout.layers(); ++l) {
        const auto w = params.weight(l);
        std::vector<double> row_major;
        row_major.reserve(static_cast<std::size_t>(w.size()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
        const auto b = params.bias(l);
        layers.push_back({{"weight_shape", {w.rows(), w.cols()}},
                          {"weight", row_major},
                          {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
    }
    j["layers"] = layers;
    std::ofstream os(path);
    if (!os) throw NetworkError("checkpoint: cannot open " + path.string() + " for writing");
    os << j.dump(1) << '\n';
    if (!os) throw NetworkError("checkpoint: write failed for " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path);
    if (!is) throw NetworkError("checkpoint: cannot open " + path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw NetworkError("checkpoint: " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "hte-mlp-checkpoint" || j.value("version", 0) != 1)
        throw NetworkError("checkpoint: " + path.string() + " is not a version-1 hte-mlp-checkpoint");
    MlpParams p{MlpLayout(j.at("layer_sizes").get<std::vector<int>>()), {}};
    p.values.assign(p.layout.parameter_count(), 0.0);
    const auto& layers = j.at("layers");
    if (layers.size() != static_cast<std::size_t>(p.layout.layers()))
        throw NetworkError("checkpoint: layer count does not match layer_sizes");
    for (int l = 0; l < p.layout.layers(); ++l) {
        const auto& lj = layers[static_cast<std::size_t>(l)];
        const auto shape = lj.at("weight_shape").get<std::vector<int>>();
        const auto w = lj.at("weight").get<std::vector<double>>();
        const auto b = lj.at("bias").get<std::vector<double>>();
        if (shape.size() != 2 || shape[0] != p.layout.rows(l) || shape[1] != p.layout.cols(l) ||
            w.size() != static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1]) ||
            b.size() != static_cast<std::size_t>(shape[0]))
            throw NetworkError("checkpoint: layer " + std::to_string(l) + " has inconsistent shapes");
        auto wm = p.weight(l);
        for (int r = 0; r < shape[0]; ++r)
            for (int c = 0; c < shape[1]; ++c) wm(r, c) = w[static_cast<std::size_t>(r) * shape[1] + c];
        p.bias(l) = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    }
    return p;
}

}  // namespace hte
