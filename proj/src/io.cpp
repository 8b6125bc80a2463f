#include "qte/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace qte::io {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

}  // namespace

void write_binspec(const BinSpec& spec, const std::string& path) {
    json j;
    j["boundaries"] = spec.boundaries;
    j["clip_lo"] = spec.clip_lo;
    j["clip_hi"] = spec.clip_hi;
    j["strategy"] = to_string(spec.strategy);
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

BinSpec read_binspec(const std::string& path) {
    auto in = open_in(path);
    json j = json::parse(in);
    BinSpec spec;
    spec.boundaries = j.at("boundaries").get<std::vector<double>>();
    spec.clip_lo = j.at("clip_lo").get<double>();
    spec.clip_hi = j.at("clip_hi").get<double>();
    spec.strategy = parse_strategy(j.at("strategy").get<std::string>());
    spec.validate();
    return spec;
}

void write_observations(std::span<const Observation> observations,
                        const std::string& path) {
    auto out = open_out(path);
    out << "unit_id,arm,value\n";
    char buf[64];
    for (const auto& obs : observations) {
        std::snprintf(buf, sizeof(buf), "%.17g", obs.value);
        out << obs.unit_id << ',' << to_string(obs.arm) << ',' << buf << '\n';
    }
}

std::vector<Observation> read_observations(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty observations file: " + path);
    if (line != "unit_id,arm,value")
        throw std::runtime_error("bad observations header in " + path);
    std::vector<Observation> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string unit, arm, value;
        if (!std::getline(ss, unit, ',') || !std::getline(ss, arm, ',') ||
            !std::getline(ss, value))
            throw std::runtime_error("bad observations row: " + line);
        out.push_back({unit, parse_arm(arm), std::stod(value)});
    }
    return out;
}

void write_histograms(std::span<const UnitHistogram> histograms,
                      const std::string& path) {
    auto out = open_out(path);
    for (const auto& h : histograms) {
        json counts = json::object();
        for (const auto& [bin, c] : h.counts) counts[std::to_string(bin)] = c;
        json j;
        j["unit"] = h.unit_id;
        j["arm"] = to_string(h.arm);
        j["counts"] = counts;
        out << j.dump() << '\n';
    }
}

std::vector<UnitHistogram> read_histograms(const std::string& path,
                                           std::size_t n_bins) {
    auto in = open_in(path);
    std::vector<UnitHistogram> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        UnitHistogram h;
        h.unit_id = j.at("unit").get<std::string>();
        h.arm = parse_arm(j.at("arm").get<std::string>());
        h.n_bins = n_bins;
        for (const auto& [key, value] : j.at("counts").items()) {
            auto bin = static_cast<std::uint32_t>(std::stoul(key));
            if (bin >= n_bins)
                throw std::runtime_error("histogram bin index out of range in " + path);
            h.counts[bin] = value.get<double>();
        }
        out.push_back(std::move(h));
    }
    return out;
}

SynthConfig read_synth_config(const std::string& path) {
    auto in = open_in(path);
    json j = json::parse(in);
    SynthConfig c;
    c.n_units = j.at("n_units").get<std::size_t>();

    const auto& cs = j.at("cluster_size");
    std::string cs_law = cs.at("law").get<std::string>();
    if (cs_law == "fixed")
        c.cluster_size_law = ClusterSizeLaw::fixed;
    else if (cs_law == "poisson_plus_one")
        c.cluster_size_law = ClusterSizeLaw::poisson_plus_one;
    else
        throw std::runtime_error("unknown cluster size law: " + cs_law);
    c.cluster_size_param = cs.at("param").get<double>();

    const auto& v = j.at("value");
    std::string v_law = v.at("law").get<std::string>();
    if (v_law == "normal") {
        c.value_law = ValueLaw::normal;
        c.value_param1 = v.at("mu").get<double>();
        c.value_param2 = v.at("sigma").get<double>();
    } else if (v_law == "lognormal") {
        c.value_law = ValueLaw::lognormal;
        c.value_param1 = v.at("mu").get<double>();
        c.value_param2 = v.at("sigma").get<double>();
    } else if (v_law == "pareto") {
        c.value_law = ValueLaw::pareto;
        c.value_param1 = v.at("x_m").get<double>();
        c.value_param2 = v.at("alpha").get<double>();
    } else {
        throw std::runtime_error("unknown value law: " + v_law);
    }

    c.treatment_fraction = j.value("treatment_fraction", 0.5);

    if (j.contains("effect")) {
        const auto& e = j.at("effect");
        std::string kind = e.at("kind").get<std::string>();
        if (kind == "none") {
            c.effect = EffectLaw::none;
        } else if (kind == "additive") {
            c.effect = EffectLaw::additive;
            c.effect_param = e.at("value").get<double>();
        } else if (kind == "multiplicative") {
            c.effect = EffectLaw::multiplicative;
            c.effect_param = e.at("value").get<double>();
        } else {
            throw std::runtime_error("unknown effect kind: " + kind);
        }
    }

    const auto& clip = j.at("clip");
    c.clip_lo = clip.at("lo").get<double>();
    c.clip_hi = clip.at("hi").get<double>();
    c.seed = j.value("seed", std::uint64_t{0});
    c.validate();
    return c;
}

}  // namespace qte::io
