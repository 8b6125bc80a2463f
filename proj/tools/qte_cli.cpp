#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qte/harness.hpp"
#include "qte/io.hpp"
#include "qte/synth.hpp"

using nlohmann::json;

namespace {

bool g_quiet = false;

void info(const std::string& msg) {
    if (!g_quiet) std::cout << msg << "\n";
}

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    if (out.empty()) throw std::runtime_error("empty numeric list: " + csv);
    return out;
}

std::string csv_sibling(const std::string& out_path) {
    auto dot = out_path.rfind('.');
    if (dot == std::string::npos) return out_path + ".csv";
    return out_path.substr(0, dot) + ".csv";
}

// Historical values file: one value per line, optional non-numeric header.
std::vector<double> read_value_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::vector<double> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(std::stod(line));
        } catch (const std::exception&) {
            if (!first) throw std::runtime_error("bad value row in " + path + ": " + line);
        }
        first = false;
    }
    if (out.empty()) throw std::runtime_error("no values in " + path);
    return out;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

char fmt_buf[64];
std::string fmt(double v) {
    std::snprintf(fmt_buf, sizeof(fmt_buf), "%.17g", v);
    return fmt_buf;
}

json arm_json(const qte::QuantileEstimate& est) {
    return json{{"q", est.q},          {"se", est.se},
                {"c", est.c},          {"L", est.bounds.lower},
                {"U", est.bounds.upper}, {"n", est.bounds.n}};
}

struct EstimateInputs {
    std::vector<qte::UnitHistogram> histograms;       // histogram mode
    std::vector<std::vector<double>> units_t, units_c;  // raw mode
    bool histogram_mode = false;
    qte::BinSpec spec;
};

json estimate_rows(const EstimateInputs& in, const std::vector<double>& ps,
                   double alpha, qte::EffectKind kind) {
    json rows = json::array();
    std::vector<const qte::UnitHistogram*> hist_t, hist_c;
    for (const auto& h : in.histograms)
        (h.arm == qte::Arm::treatment ? hist_t : hist_c).push_back(&h);

    for (double p : ps) {
        json row;
        row["p"] = p;
        try {
            auto query = qte::make_query(p, alpha);
            qte::QuantileEstimate est_t, est_c;
            if (in.histogram_mode) {
                est_t = qte::histogram_quantile_ci(hist_t, in.spec, query);
                est_c = qte::histogram_quantile_ci(hist_c, in.spec, query);
            } else {
                est_t = qte::exact_quantile_ci(in.units_t, query);
                est_c = qte::exact_quantile_ci(in.units_c, query);
            }
            auto eff = kind == qte::EffectKind::absolute
                           ? qte::qte_absolute(est_t, est_c, query)
                           : qte::qte_relative(est_t, est_c, query);
            row["arm_t"] = arm_json(est_t);
            row["arm_c"] = arm_json(est_c);
            row["effect"] = json{{"kind", kind == qte::EffectKind::absolute ? "absolute" : "relative"},
                                 {"tau", eff.tau},
                                 {"se", eff.se},
                                 {"ci_lo", eff.ci_lo},
                                 {"ci_hi", eff.ci_hi},
                                 {"p_value", eff.p_value}};
            json flags = json::array();
            for (const auto& f : est_t.flags) flags.push_back("treatment:" + f);
            for (const auto& f : est_c.flags) flags.push_back("control:" + f);
            row["flags"] = flags;
        } catch (const std::exception& e) {
            row["error"] = e.what();
            std::cerr << "estimate failed at p=" << p << ": " << e.what() << "\n";
        }
        rows.push_back(row);
    }
    return rows;
}

int cmd_bins(const std::string& strategy, double lo, double hi, std::size_t n,
             const std::string& from, double log_floor, const std::string& out) {
    qte::BinSpec spec;
    auto strat = qte::parse_strategy(strategy);
    if (strat == qte::BinStrategy::historical) {
        if (from.empty())
            throw std::runtime_error("historical strategy requires --from <values file>");
        auto values = read_value_file(from);
        spec = qte::historical_quantile_bins(values, n);
    } else if (strat == qte::BinStrategy::linear) {
        spec = qte::linear_bins(lo, hi, n);
    } else {
        spec = qte::log_linear_bins(lo, hi, n, log_floor);
    }
    qte::io::write_binspec(spec, out);
    info("wrote " + std::to_string(spec.boundaries.size()) + " boundaries (" +
         std::to_string(spec.bin_count()) + " bins, requested " + std::to_string(n) +
         ") to " + out);
    return 0;
}

int cmd_aggregate(const std::string& obs_path, const std::string& spec_path,
                  const std::string& out) {
    auto spec = qte::io::read_binspec(spec_path);
    auto obs = qte::io::read_observations(obs_path);
    if (obs.empty()) std::cerr << "warning: no observations in " << obs_path << "\n";
    auto hists = qte::aggregate(obs, spec);
    qte::io::write_histograms(hists, out);
    info("aggregated " + std::to_string(obs.size()) + " observations into " +
         std::to_string(hists.size()) + " unit histograms");
    return 0;
}

int cmd_estimate(const std::string& obs_path, const std::string& hist_path,
                 const std::string& spec_path, const std::string& p_list,
                 double alpha, const std::string& kind_str, const std::string& out) {
    if (obs_path.empty() == hist_path.empty())
        throw std::runtime_error("estimate: provide exactly one of --obs / --hist");
    auto ps = parse_list(p_list);
    auto kind = kind_str == "relative" ? qte::EffectKind::relative
              : kind_str == "absolute" ? qte::EffectKind::absolute
              : throw std::runtime_error("unknown --kind: " + kind_str);

    EstimateInputs in;
    if (!hist_path.empty()) {
        if (spec_path.empty())
            throw std::runtime_error("histogram input requires --binspec");
        in.histogram_mode = true;
        in.spec = qte::io::read_binspec(spec_path);
        in.histograms = qte::io::read_histograms(hist_path, in.spec.bin_count());
    } else {
        auto obs = qte::io::read_observations(obs_path);
        std::map<std::string, std::pair<qte::Arm, std::vector<double>>> per_unit;
        for (const auto& o : obs) {
            auto& entry = per_unit[o.unit_id];
            if (!entry.second.empty() && entry.first != o.arm)
                throw std::runtime_error("unit in both arms: " + o.unit_id);
            entry.first = o.arm;
            entry.second.push_back(o.value);
        }
        for (auto& [id, entry] : per_unit)
            (entry.first == qte::Arm::treatment ? in.units_t : in.units_c)
                .push_back(std::move(entry.second));
    }

    json report;
    report["alpha"] = alpha;
    report["estimates"] = estimate_rows(in, ps, alpha, kind);
    write_text(out, report.dump(2) + "\n");
    info("wrote estimate report to " + out);
    bool any_error = false;
    for (const auto& row : report["estimates"])
        if (row.contains("error")) any_error = true;
    return any_error ? 1 : 0;
}

int cmd_privatize(const std::string& hist_path, const std::string& spec_path,
                  double epsilon, int sensitivity, std::uint64_t dp_seed,
                  const std::string& mode_str, const std::string& out) {
    auto spec = qte::io::read_binspec(spec_path);
    auto hists = qte::io::read_histograms(hist_path, spec.bin_count());
    qte::PrivacyParams params{epsilon, sensitivity, dp_seed};
    auto mode = qte::parse_dp_mode(mode_str);
    std::vector<qte::UnitHistogram> noisy;
    if (mode == qte::DpMode::per_unit) {
        noisy = qte::privatize_all(hists, params);
    } else {
        for (qte::Arm arm : {qte::Arm::treatment, qte::Arm::control}) {
            auto pooled = qte::pooled_counts(hists, arm, spec.bin_count());
            auto priv = qte::privatize_pooled(pooled, arm, params);
            qte::UnitHistogram h;
            h.unit_id = std::string("__pooled_") + qte::to_string(arm);
            h.arm = arm;
            h.n_bins = spec.bin_count();
            for (std::size_t j = 0; j < priv.counts.size(); ++j)
                if (priv.counts[j] > 0.0)
                    h.counts[static_cast<std::uint32_t>(j)] = priv.counts[j];
            noisy.push_back(std::move(h));
        }
    }
    qte::io::write_histograms(noisy, out);
    info("privatized " + std::to_string(noisy.size()) + " histograms (epsilon=" +
         fmt(epsilon) + ", mode=" + mode_str + ")");
    return 0;
}

int cmd_aa_test(const std::string& hist_path, const std::string& spec_path,
                double p, double alpha, std::size_t perms, std::uint64_t seed,
                const std::string& out) {
    auto spec = qte::io::read_binspec(spec_path);
    auto hists = qte::io::read_histograms(hist_path, spec.bin_count());
    auto report = qte::aa_test(hists, spec, p, alpha, perms, seed);

    json j;
    j["p"] = p;
    j["alpha"] = alpha;
    j["n_permutations"] = report.n_permutations;
    j["failures"] = report.failures;
    j["ks_statistic"] = report.ks_statistic;
    j["ks_p_value"] = report.ks_p_value;
    j["cover_95"] = report.cover_95;
    j["cover_99"] = report.cover_99;
    j["p_values"] = report.p_values;
    write_text(out, j.dump(2) + "\n");

    std::ostringstream csv;
    csv << "trial,p_value,tau,se\n";
    for (std::size_t i = 0; i < report.p_values.size(); ++i)
        csv << i << ',' << fmt(report.p_values[i]) << ',' << fmt(report.taus[i])
            << ',' << fmt(report.ses[i]) << '\n';
    write_text(csv_sibling(out), csv.str());

    info("aa-test: ks_p=" + fmt(report.ks_p_value) + " cover95=" +
         fmt(report.cover_95) + " cover99=" + fmt(report.cover_99));
    return 0;
}

int cmd_compare(const std::string& obs_path, const std::string& spec_path,
                const std::string& p_list, double alpha, const std::string& kind_str,
                const std::string& out) {
    auto spec = qte::io::read_binspec(spec_path);
    auto obs = qte::io::read_observations(obs_path);
    auto ps = parse_list(p_list);
    auto kind = kind_str == "relative" ? qte::EffectKind::relative : qte::EffectKind::absolute;
    auto report = qte::compare_to_baseline(obs, spec, ps, qte::make_query(0.5, alpha), kind);

    json rows = json::array();
    std::ostringstream csv;
    csv << "p,n_bins,strategy,baseline_tau,baseline_ci_width,hist_tau,hist_ci_width,"
           "tau_rel_err,ci_width_rel_err\n";
    for (const auto& row : report.rows) {
        json r;
        r["p"] = row.p;
        r["n_bins"] = row.n_bins;
        r["strategy"] = qte::to_string(row.strategy);
        r["baseline_tau"] = row.baseline_tau;
        r["baseline_ci_width"] = row.baseline_ci_width;
        r["hist_tau"] = row.hist_tau;
        r["hist_ci_width"] = row.hist_ci_width;
        if (row.tau_rel_err)
            r["tau_rel_err"] = *row.tau_rel_err;
        else
            r["tau_rel_err_flag"] = "baseline_zero";
        if (row.ci_width_rel_err)
            r["ci_width_rel_err"] = *row.ci_width_rel_err;
        else
            r["ci_width_rel_err_flag"] = "baseline_zero";
        rows.push_back(r);
        csv << fmt(row.p) << ',' << row.n_bins << ',' << qte::to_string(row.strategy)
            << ',' << fmt(row.baseline_tau) << ',' << fmt(row.baseline_ci_width) << ','
            << fmt(row.hist_tau) << ',' << fmt(row.hist_ci_width) << ','
            << (row.tau_rel_err ? fmt(*row.tau_rel_err) : "NA") << ','
            << (row.ci_width_rel_err ? fmt(*row.ci_width_rel_err) : "NA") << '\n';
    }
    json j;
    j["alpha"] = alpha;
    j["rows"] = rows;
    write_text(out, j.dump(2) + "\n");
    write_text(csv_sibling(out), csv.str());
    info("compared " + std::to_string(report.rows.size()) + " quantiles against the baseline");
    return 0;
}

int cmd_dp_sweep(const std::string& hist_path, const std::string& spec_path,
                 double p, double alpha, const std::string& eps_list,
                 std::size_t draws, std::uint64_t seed, int sensitivity,
                 const std::string& mode_str, const std::string& out) {
    auto spec = qte::io::read_binspec(spec_path);
    auto hists = qte::io::read_histograms(hist_path, spec.bin_count());
    auto epsilons = parse_list(eps_list);
    auto mode = qte::parse_dp_mode(mode_str);
    auto sweeps = qte::dp_sweep(hists, spec, p, alpha, epsilons, draws, seed,
                                sensitivity, mode);

    json rows = json::array();
    std::ostringstream csv;
    csv << "epsilon,draw,tau,se\n";
    for (const auto& s : sweeps) {
        rows.push_back(json{{"epsilon", s.epsilon},
                            {"tau_mean", s.tau_mean},
                            {"tau_sd", s.tau_sd},
                            {"tau_p05", s.tau_p05},
                            {"tau_p95", s.tau_p95},
                            {"se_mean", s.se_mean},
                            {"se_sd", s.se_sd},
                            {"se_bias", s.se_bias}});
        for (std::size_t d = 0; d < s.taus.size(); ++d)
            csv << fmt(s.epsilon) << ',' << d << ',' << fmt(s.taus[d]) << ','
                << fmt(s.ses[d]) << '\n';
    }
    json j;
    j["p"] = p;
    j["alpha"] = alpha;
    j["n_draws"] = draws;
    j["mode"] = mode_str;
    j["sensitivity"] = sensitivity;
    j["sweeps"] = rows;
    write_text(out, j.dump(2) + "\n");
    write_text(csv_sibling(out), csv.str());
    info("dp-sweep over " + std::to_string(epsilons.size()) + " epsilon values");
    return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out,
                 const std::string& historical_out, std::size_t historical_n,
                 double historical_shift) {
    auto config = qte::io::read_synth_config(config_path);
    auto obs = qte::generate(config);
    qte::io::write_observations(obs, out);
    info("simulated " + std::to_string(obs.size()) + " observations");
    if (!historical_out.empty()) {
        auto values = qte::generate_historical(config, historical_n, historical_shift);
        std::ostringstream ss;
        ss << "value\n";
        for (double v : values) ss << fmt(v) << '\n';
        write_text(historical_out, ss.str());
        info("wrote " + std::to_string(values.size()) + " historical values");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantile treatment effect estimation from per-unit histograms"};
    app.require_subcommand(1);
    app.add_flag("--quiet", g_quiet, "suppress progress output");

    // bins
    std::string bins_strategy = "linear", bins_from, bins_out = "binspec.json";
    double bins_lo = 0.0, bins_hi = 1.0, bins_floor = 1.0;
    std::size_t bins_n = 100;
    auto* bins = app.add_subcommand("bins", "derive bin boundaries");
    bins->add_option("--strategy", bins_strategy, "linear|loglinear|historical");
    bins->add_option("--lo", bins_lo, "lower clip threshold");
    bins->add_option("--hi", bins_hi, "upper clip threshold");
    bins->add_option("--n", bins_n, "requested bin count");
    bins->add_option("--from", bins_from, "historical values file");
    bins->add_option("--log-floor", bins_floor, "log-spacing floor for loglinear");
    bins->add_option("--out", bins_out, "output BinSpec JSON");

    // aggregate
    std::string agg_obs, agg_spec, agg_out = "histograms.jsonl";
    auto* agg = app.add_subcommand("aggregate", "aggregate observations into unit histograms");
    agg->add_option("--obs", agg_obs, "observations CSV")->required();
    agg->add_option("--binspec", agg_spec, "BinSpec JSON")->required();
    agg->add_option("--out", agg_out, "output histogram JSONL");

    // estimate
    std::string est_obs, est_hist, est_spec, est_p = "0.5", est_kind = "absolute",
                est_out = "estimate.json";
    double est_alpha = 0.05;
    auto* est = app.add_subcommand("estimate", "estimate QTEs with confidence intervals");
    est->add_option("--obs", est_obs, "observations CSV (exact mode)");
    est->add_option("--hist", est_hist, "histogram JSONL (histogram mode)");
    est->add_option("--binspec", est_spec, "BinSpec JSON (required with --hist)");
    est->add_option("--p", est_p, "comma-separated quantiles");
    est->add_option("--alpha", est_alpha, "significance level");
    est->add_option("--kind", est_kind, "absolute|relative");
    est->add_option("--out", est_out, "output report JSON");

    // privatize
    std::string priv_hist, priv_spec, priv_mode = "per-unit", priv_out = "private.jsonl";
    double priv_eps = 1.0;
    int priv_sens = 1;
    std::uint64_t priv_seed = 0;
    auto* priv = app.add_subcommand("privatize", "add two-sided geometric noise to histograms");
    priv->add_option("--hist", priv_hist, "histogram JSONL")->required();
    priv->add_option("--binspec", priv_spec, "BinSpec JSON")->required();
    priv->add_option("--epsilon", priv_eps, "privacy budget");
    priv->add_option("--sensitivity", priv_sens, "per-bin sensitivity");
    priv->add_option("--dp-seed", priv_seed, "noise seed");
    priv->add_option("--dp-mode", priv_mode, "per-unit|pooled");
    priv->add_option("--out", priv_out, "output histogram JSONL");

    // aa-test
    std::string aa_hist, aa_spec, aa_out = "aa_report.json";
    double aa_p = 0.5, aa_alpha = 0.05;
    std::size_t aa_perms = 1000;
    std::uint64_t aa_seed = 0;
    auto* aa = app.add_subcommand("aa-test", "A/A permutation test");
    aa->add_option("--hist", aa_hist, "histogram JSONL")->required();
    aa->add_option("--binspec", aa_spec, "BinSpec JSON")->required();
    aa->add_option("--p", aa_p, "quantile");
    aa->add_option("--alpha", aa_alpha, "significance level");
    aa->add_option("--perms", aa_perms, "number of permutations");
    aa->add_option("--seed", aa_seed, "permutation seed");
    aa->add_option("--out", aa_out, "output report JSON (CSV written alongside)");

    // compare
    std::string cmp_obs, cmp_spec, cmp_p = "0.5,0.95,0.99", cmp_kind = "absolute",
                cmp_out = "compare.json";
    double cmp_alpha = 0.05;
    auto* cmp = app.add_subcommand("compare", "histogram vs full-data baseline");
    cmp->add_option("--obs", cmp_obs, "observations CSV")->required();
    cmp->add_option("--binspec", cmp_spec, "BinSpec JSON")->required();
    cmp->add_option("--p", cmp_p, "comma-separated quantiles");
    cmp->add_option("--alpha", cmp_alpha, "significance level");
    cmp->add_option("--kind", cmp_kind, "absolute|relative");
    cmp->add_option("--out", cmp_out, "output report JSON (CSV written alongside)");

    // dp-sweep
    std::string dps_hist, dps_spec, dps_eps = "10,5,1,0.5", dps_mode = "per-unit",
                dps_out = "dp_sweep.json";
    double dps_p = 0.5, dps_alpha = 0.05;
    std::size_t dps_draws = 500;
    std::uint64_t dps_seed = 0;
    int dps_sens = 1;
    auto* dps = app.add_subcommand("dp-sweep", "noise sweep over epsilon values");
    dps->add_option("--hist", dps_hist, "histogram JSONL")->required();
    dps->add_option("--binspec", dps_spec, "BinSpec JSON")->required();
    dps->add_option("--p", dps_p, "quantile");
    dps->add_option("--alpha", dps_alpha, "significance level");
    dps->add_option("--epsilons", dps_eps, "comma-separated epsilon values");
    dps->add_option("--draws", dps_draws, "noise draws per epsilon");
    dps->add_option("--seed", dps_seed, "noise seed");
    dps->add_option("--sensitivity", dps_sens, "per-bin sensitivity");
    dps->add_option("--dp-mode", dps_mode, "per-unit|pooled");
    dps->add_option("--out", dps_out, "output report JSON (CSV written alongside)");

    // simulate
    std::string sim_config, sim_out = "observations.csv", sim_hist_out;
    std::size_t sim_hist_n = 100000;
    double sim_hist_shift = 0.0;
    auto* sim = app.add_subcommand("simulate", "generate synthetic experiment data");
    sim->add_option("--config", sim_config, "SynthConfig JSON")->required();
    sim->add_option("--out", sim_out, "output observations CSV");
    sim->add_option("--historical", sim_hist_out, "also write historical values here");
    sim->add_option("--historical-n", sim_hist_n, "historical sample size");
    sim->add_option("--historical-shift", sim_hist_shift, "historical location shift");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bins->parsed())
            return cmd_bins(bins_strategy, bins_lo, bins_hi, bins_n, bins_from,
                            bins_floor, bins_out);
        if (agg->parsed()) return cmd_aggregate(agg_obs, agg_spec, agg_out);
        if (est->parsed())
            return cmd_estimate(est_obs, est_hist, est_spec, est_p, est_alpha,
                                est_kind, est_out);
        if (priv->parsed())
            return cmd_privatize(priv_hist, priv_spec, priv_eps, priv_sens,
                                 priv_seed, priv_mode, priv_out);
        if (aa->parsed())
            return cmd_aa_test(aa_hist, aa_spec, aa_p, aa_alpha, aa_perms, aa_seed,
                               aa_out);
        if (cmp->parsed())
            return cmd_compare(cmp_obs, cmp_spec, cmp_p, cmp_alpha, cmp_kind, cmp_out);
        if (dps->parsed())
            return cmd_dp_sweep(dps_hist, dps_spec, dps_p, dps_alpha, dps_eps,
                                dps_draws, dps_seed, dps_sens, dps_mode, dps_out);
        if (sim->parsed())
            return cmd_simulate(sim_config, sim_out, sim_hist_out, sim_hist_n,
                                sim_hist_shift);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
