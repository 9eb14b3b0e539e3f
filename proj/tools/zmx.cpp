// zmx: similarity-matrix exploration of repeated-measures cohorts.
//
// Subcommands cover the full pipeline: z-matrix computation and rendering,
// shrinkage and covariate smoothing, discrete mixture fits with a boundary
// likelihood-ratio test, random-intercept logistic regression, null-model
// lineup simulations, the embedded reference data, and the reproduction
// runner. Every output is a deterministic function of inputs, flags and the
// explicit seed.
//
// Exit codes: 0 success, 1 usage, 2 bad data, 3 convergence failure,
// 4 reproduction mismatch.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zmx/csv.hpp"
#include "zmx/likelihood.hpp"
#include "zmx/mixedlogit.hpp"
#include "zmx/npml.hpp"
#include "zmx/cadet2.hpp"
#include "zmx/render.hpp"
#include "zmx/rng.hpp"
#include "zmx/simtest.hpp"
#include "zmx/zmatrix.hpp"

namespace {

using json = nlohmann::ordered_json;

constexpr int exit_usage = 1;
constexpr int exit_data = 2;
constexpr int exit_convergence = 3;
constexpr int exit_mismatch = 4;

struct ConvergenceFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Relative output paths land under $ZMX_OUT_DIR when it is set.
std::filesystem::path resolve_out(const std::string& path) {
    std::filesystem::path p(path);
    if (p.is_relative()) {
        if (const char* dir = std::getenv("ZMX_OUT_DIR"); dir != nullptr && *dir != '\0')
            p = std::filesystem::path(dir) / p;
    }
    return p;
}

void write_output(const std::string& path, const std::string& content) {
    if (path == "-") {
        std::fwrite(content.data(), 1, content.size(), stdout);
        return;
    }
    const auto resolved = resolve_out(path);
    if (resolved.has_parent_path()) std::filesystem::create_directories(resolved.parent_path());
    std::ofstream out(resolved, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file " + resolved.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

zmx::Cohort load_cohort(const std::string& input, const std::string& family,
                        const std::string& covariates_path) {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw zmx::SchemaError("cannot open input file " + input);
    zmx::Cohort cohort;
    if (family == "binomial") {
        cohort = zmx::read_binomial_cohort(in);
    } else {
        cohort = zmx::read_multinomial_cohort(in);
        if (!covariates_path.empty()) {
            std::ifstream side(covariates_path, std::ios::binary);
            if (!side) throw zmx::SchemaError("cannot open covariate file " + covariates_path);
            zmx::read_covariate_sidecar(side, cohort.units);
        }
    }
    return cohort;
}

/// "estimate-asc", "estimate-desc", "ids:a,b,c" or "covariate:v1,v2,...".
zmx::OrderSpec parse_order(const std::string& spec, const std::string& within) {
    const bool within_desc = within == "estimate-desc";
    if (!within.empty() && within != "estimate-asc" && within != "estimate-desc")
        throw CLI::ValidationError("--within-order", "must be estimate-asc or estimate-desc");

    if (spec == "estimate-asc") return zmx::OrderSpec::by_estimate(true);
    if (spec == "estimate-desc") return zmx::OrderSpec::by_estimate(false);
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--order",
                                   "expected estimate-asc, estimate-desc, ids:..., or name:v1,v2,...");
    const std::string head = spec.substr(0, colon);
    std::vector<std::string> parts;
    std::stringstream rest(spec.substr(colon + 1));
    std::string tok;
    while (std::getline(rest, tok, ',')) parts.push_back(tok);
    if (head == "ids") return zmx::OrderSpec::by_ids(parts);
    std::vector<double> values;
    for (const auto& p : parts) values.push_back(std::stod(p));
    return zmx::OrderSpec::by_covariate(head, values, within_desc);
}

json matrix_json(const zmx::ZMatrix& z) {
    json j;
    j["order"] = z.order;
    j["estimates"] = z.estimates;
    j["entries"] = z.entries;
    return j;
}

json diagnostics_json(const zmx::ZDiagnostics& d) {
    json j;
    j["diag"] = d.diag;
    j["colsum"] = d.colsum;
    j["trace_over_n"] = d.trace_over_n;
    j["excess"] = d.excess;
    j["ratio"] = d.ratio;
    return j;
}

std::string diagnostics_text(const zmx::ZMatrix& z, const zmx::ZDiagnostics& d) {
    std::string out = "unit_id  diag  colsum  excess  ratio\n";
    char buf[160];
    for (std::size_t i = 0; i < z.n(); ++i) {
        std::snprintf(buf, sizeof buf, "%s  %.6f  %.6f  %.6f  %.6f\n", z.order[i].c_str(),
                      d.diag[i], d.colsum[i], d.excess[i], d.ratio[i]);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "trace_over_n  %.6f\n", d.trace_over_n);
    out += buf;
    return out;
}

json fit_json(const zmx::MixtureFit& fit) {
    json j;
    j["atoms"] = fit.atoms;
    j["masses"] = fit.masses;
    j["loglik"] = fit.loglik;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    return j;
}

std::string or_line(const zmx::OddsRatio& o) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-18s %.2f %.2f %.2f\n", o.name.c_str(), o.lo95, o.odds_ratio,
                  o.hi95);
    return buf;
}

int run_zmatrix(const std::string& input, const std::string& family, const std::string& covariates,
                const std::string& order, const std::string& within, bool transpose, double scale,
                double suppress_below, bool post_round, const std::string& label,
                const std::string& format, const std::string& out,
                const std::string& diagnostics_out, const std::string& density_out) {
    auto cohort = load_cohort(input, family, covariates);
    if (cohort.units.size() < 2) throw zmx::SchemaError("need at least 2 units");
    zmx::ZMatrix z = zmx::compute_z(cohort.units, cohort.family);
    if (!order.empty()) z = zmx::reorder(z, parse_order(order, within));

    if (format == "text") {
        zmx::TableOptions opts;
        opts.transpose = transpose;
        opts.scale = scale;
        opts.suppress_below = suppress_below;
        opts.post_round_suppress = post_round;
        opts.label_covariate = label;
        write_output(out, zmx::table_text(z, opts));
    } else if (format == "csv") {
        write_output(out, zmx::matrix_csv(z));
    } else if (format == "json") {
        json j = matrix_json(z);
        j["diagnostics"] = diagnostics_json(zmx::diagnostics(z));
        write_output(out, j.dump(2) + "\n");
    } else if (format == "svg") {
        write_output(out, zmx::symbols_svg(z));
    } else {
        throw CLI::ValidationError("--format", "must be text, csv, json, or svg");
    }

    if (!diagnostics_out.empty())
        write_output(diagnostics_out, diagnostics_text(z, zmx::diagnostics(z)));
    if (!density_out.empty()) {
        const zmx::ZMatrix ordered = zmx::reorder(z, zmx::OrderSpec::by_estimate(true));
        const auto w = zmx::density_weights(ordered);
        std::vector<double> estimates;
        bool positive = true;
        for (const auto& u : ordered.estimates) {
            estimates.push_back(u[0]);
            positive = positive && u[0] > 0.0;
        }
        write_output(density_out, zmx::cdf_density_svg(w.density, w.cdf, estimates, positive));
    }
    return 0;
}

int run_shrink(const std::string& input, const std::string& family, const std::string& covariates,
               const std::string& format, const std::string& out) {
    auto cohort = load_cohort(input, family, covariates);
    if (cohort.units.size() < 2) throw zmx::SchemaError("need at least 2 units");
    const zmx::ZMatrix z = zmx::compute_z(cohort.units, cohort.family);
    const auto predictions = zmx::shrink_estimates(z);

    if (format == "json") {
        json j;
        j["order"] = z.order;
        j["estimates"] = z.estimates;
        j["predictions"] = predictions;
        write_output(out, j.dump(2) + "\n");
    } else {
        std::string text = "unit_id  estimate  prediction\n";
        char buf[256];
        for (std::size_t i = 0; i < z.n(); ++i) {
            std::string est, pred;
            for (double v : z.estimates[i]) {
                std::snprintf(buf, sizeof buf, est.empty() ? "%.6f" : " %.6f", v);
                est += buf;
            }
            for (double v : predictions[i]) {
                std::snprintf(buf, sizeof buf, pred.empty() ? "%.6f" : " %.6f", v);
                pred += buf;
            }
            text += z.order[i] + "  " + est + "  " + pred + "\n";
        }
        write_output(out, text);
    }
    return 0;
}

int run_smooth(const std::string& input, const std::string& family, const std::string& covariates,
               const std::string& covariate, bool literal, const std::string& format,
               const std::string& out) {
    auto cohort = load_cohort(input, family, covariates);
    if (cohort.units.size() < 2) throw zmx::SchemaError("need at least 2 units");
    const zmx::ZMatrix z = zmx::compute_z(cohort.units, cohort.family);
    std::vector<double> x;
    for (const auto& unit : cohort.units) x.push_back(unit.covariate(covariate));
    const auto smoothed = zmx::smooth_covariates(z, x, literal);
    const char* convention = literal ? "literal" : "normalized";

    if (format == "json") {
        json j;
        j["covariate"] = covariate;
        j["convention"] = convention;
        j["order"] = z.order;
        j["observed"] = x;
        j["smoothed"] = smoothed;
        write_output(out, j.dump(2) + "\n");
    } else {
        std::string text = "# covariate=" + covariate + " convention=" + convention + "\n";
        char buf[128];
        for (std::size_t i = 0; i < z.n(); ++i) {
            std::snprintf(buf, sizeof buf, "%s  %.6f  %.6f\n", z.order[i].c_str(), x[i],
                          smoothed[i]);
            text += buf;
        }
        write_output(out, text);
    }
    return 0;
}

int run_npml(const std::string& input, const std::string& family, const std::string& covariates,
             const zmx::EmConfig& cfg, const std::string& format, const std::string& out) {
    auto cohort = load_cohort(input, family, covariates);
    if (cohort.units.size() < 2) throw zmx::SchemaError("need at least 2 units");
    const zmx::MixtureFit alt = zmx::em_fit(cohort.units, cohort.family, cfg);
    if (!alt.converged) throw ConvergenceFailure("EM did not converge within the iteration cap");
    const zmx::MixtureFit null_fit = zmx::degenerate_fit(cohort.units, cohort.family);
    const zmx::LrTestResult lr = zmx::lr_test(alt, null_fit);

    if (format == "json") {
        json j;
        j["alternative"] = fit_json(alt);
        j["degenerate"] = fit_json(null_fit);
        j["lr_test"] = {{"statistic", lr.statistic},
                        {"p_value", lr.p_value},
                        {"df_convention", lr.df_convention}};
        write_output(out, j.dump(2) + "\n");
    } else {
        std::string text;
        char buf[256];
        text += "alternative fit:\n";
        for (std::size_t jx = 0; jx < alt.atoms.size(); ++jx) {
            std::string atom;
            for (double v : alt.atoms[jx]) {
                std::snprintf(buf, sizeof buf, atom.empty() ? "%.6f" : " %.6f", v);
                atom += buf;
            }
            std::snprintf(buf, sizeof buf, "  atom %-24s mass %.6f\n", atom.c_str(),
                          alt.masses[jx]);
            text += buf;
        }
        std::snprintf(buf, sizeof buf, "  loglik %.6f  iterations %ld  converged %s\n", alt.loglik,
                      alt.iterations, alt.converged ? "yes" : "no");
        text += buf;
        std::snprintf(buf, sizeof buf, "degenerate fit:\n  atom %.6f  loglik %.6f\n",
                      null_fit.atoms[0][0], null_fit.loglik);
        text += buf;
        std::snprintf(buf, sizeof buf, "lr test: statistic %.4f  p %.3g  (%s)\n", lr.statistic,
                      lr.p_value, lr.df_convention.c_str());
        text += buf;
        write_output(out, text);
    }
    return 0;
}

int run_mixedlogit(const std::string& input, const std::string& experience, int nodes,
                   const std::string& format, const std::string& out) {
    auto cohort = load_cohort(input, "binomial", "");
    const auto encoding = zmx::experience_encoding_from_string(experience);
    const auto design = zmx::make_experience_design(cohort.units, encoding);
    const zmx::MixedLogitFit mixed = zmx::fit(design, nodes);
    if (!mixed.converged) throw ConvergenceFailure("mixed logit fit did not converge");
    const auto ors = zmx::odds_ratios(mixed);

    if (format == "json") {
        json j;
        j["names"] = mixed.names;
        j["beta"] = mixed.beta;
        std::vector<double> se;
        for (std::size_t k = 0; k < mixed.beta.size(); ++k)
            se.push_back(std::sqrt(std::max(0.0, mixed.cov[k][k])));
        j["se"] = se;
        j["ln_sigma2"] = mixed.ln_sigma2;
        j["loglik"] = mixed.loglik;
        j["quad_nodes"] = mixed.quad_nodes;
        j["boundary_flag"] = mixed.boundary_flag;
        json ors_json = json::array();
        for (const auto& o : ors)
            ors_json.push_back({{"name", o.name},
                                {"odds_ratio", o.odds_ratio},
                                {"lo95", o.lo95},
                                {"hi95", o.hi95}});
        j["odds_ratios"] = ors_json;
        write_output(out, j.dump(2) + "\n");
    } else {
        std::string text = "odds ratios (lo95 estimate hi95):\n";
        for (const auto& o : ors) text += "  " + or_line(o);
        char buf[160];
        std::snprintf(buf, sizeof buf, "ln_sigma2 %.4f%s\nloglik %.6f  nodes %d\n",
                      mixed.ln_sigma2, mixed.boundary_flag ? "  (variance collapsed to 0)" : "",
                      mixed.loglik, mixed.quad_nodes);
        text += buf;
        write_output(out, text);
    }
    return 0;
}

int run_simtest(const std::string& input, const std::string& family,
                const std::string& covariates, std::uint64_t seed, int replicates,
                const std::string& order_rule, bool observed_first, const std::string& out_dir) {
    auto cohort = load_cohort(input, family, covariates);
    if (cohort.units.size() < 2) throw zmx::SchemaError("need at least 2 units");

    zmx::SimConfig config;
    config.seed = seed;
    config.replicates = replicates;
    if (order_rule == "fixed")
        config.order_rule = zmx::SimConfig::OrderRule::fixed;
    else if (order_rule != "descending")
        throw CLI::ValidationError("--order-rule", "must be descending or fixed");

    zmx::ZMatrix observed = zmx::compute_z(cohort.units, cohort.family);
    if (config.order_rule == zmx::SimConfig::OrderRule::descending_by_estimate)
        observed = zmx::reorder(observed, zmx::OrderSpec::by_estimate(false));
    const auto sims = zmx::simulate_null(cohort.units, cohort.family, config);
    const auto layout = zmx::lineup_panels(static_cast<int>(sims.size()), seed, observed_first);

    const auto dir = resolve_out(out_dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream svg(dir / "lineup.svg", std::ios::binary);
        svg << zmx::lineup_svg(observed, sims, layout);
    }
    {
        json answer;
        answer["seed"] = seed;
        answer["observed_panel"] = layout.observed_panel + 1;  // 1-based, as drawn
        std::ofstream ans(dir / "answer.json", std::ios::binary);
        ans << answer.dump(2) << "\n";
    }
    return 0;
}

int run_reproduce(const std::string& format, const std::string& out) {
    const auto report = zmx::cadet2::reproduce_all();
    if (format == "json") {
        json j;
        json targets = json::array();
        for (const auto& t : report.targets) {
            json tj;
            tj["name"] = t.name;
            tj["computed"] = t.computed;
            tj["expected"] = t.expected;
            tj["tolerance"] = t.tolerance;
            tj["mode"] =
                t.mode == zmx::cadet2::ReproTarget::Mode::less_than ? "less_than" : "abs_diff";
            tj["pass"] = t.pass;
            if (!t.note.empty()) tj["note"] = t.note;
            targets.push_back(std::move(tj));
        }
        j["targets"] = targets;
        j["all_pass"] = report.all_pass;
        write_output(out, j.dump(2) + "\n");
    } else {
        write_output(out, zmx::cadet2::report_text(report));
    }
    return report.all_pass ? 0 : exit_mismatch;
}

int run_export(const std::string& cohort_name, const std::string& out) {
    const auto name = zmx::cadet2::cohort_from_string(cohort_name);
    write_output(out, zmx::write_binomial_cohort(zmx::cadet2::load(name)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"similarity-matrix exploratory analysis of repeated-measures cohorts"};
    app.require_subcommand(1);

    // shared options
    std::string input, family = "binomial", covariates, format = "text", out = "-";
    std::string order, within_order, label, diagnostics_out, density_out;
    bool transpose = true, post_round = false, literal = false, observed_first = false;
    double scale = 1000.0, suppress_below = 1.0;
    std::string covariate, experience = "gt6", order_rule = "descending", out_dir = ".";
    std::string cohort_name;
    int nodes = 16, replicates = 3;
    std::uint64_t seed = 0;
    zmx::EmConfig em_cfg;

    auto add_input = [&](CLI::App* cmd, bool with_family = true) {
        cmd->add_option("--input", input, "cohort CSV file")->required();
        if (with_family)
            cmd->add_option("--family", family, "binomial or multinomial")
                ->check(CLI::IsMember({"binomial", "multinomial"}));
        cmd->add_option("--covariates", covariates, "covariate sidecar CSV (multinomial)");
    };

    auto* cmd_zmatrix = app.add_subcommand("zmatrix", "compute and render the z-matrix");
    add_input(cmd_zmatrix);
    cmd_zmatrix->add_option("--order", order, "estimate-asc|estimate-desc|ids:...|covariate:v1,v2,...");
    cmd_zmatrix->add_option("--within-order", within_order, "estimate direction within groups");
    cmd_zmatrix->add_flag("--transpose,!--no-transpose", transpose, "print the transpose (default on)");
    cmd_zmatrix->add_option("--scale", scale, "display scale (default 1000)");
    cmd_zmatrix->add_option("--suppress-below", suppress_below, "blank scaled values below this");
    cmd_zmatrix->add_flag("--post-round-suppress", post_round, "apply suppression after rounding");
    cmd_zmatrix->add_option("--label", label, "covariate used as row/column labels");
    cmd_zmatrix->add_option("--format", format, "text|csv|json|svg");
    cmd_zmatrix->add_option("--out", out, "output path or - for stdout");
    cmd_zmatrix->add_option("--diagnostics", diagnostics_out, "write diagnostics to this path");
    cmd_zmatrix->add_option("--density-svg", density_out, "write the CDF/density chart here");

    auto* cmd_shrink = app.add_subcommand("shrink", "z-weighted shrinkage predictions");
    add_input(cmd_shrink);
    cmd_shrink->add_option("--format", format, "text|json");
    cmd_shrink->add_option("--out", out, "output path or - for stdout");

    auto* cmd_smooth = app.add_subcommand("smooth", "expected covariate given the estimate");
    add_input(cmd_smooth);
    cmd_smooth->add_option("--covariate", covariate, "covariate to smooth")->required();
    cmd_smooth->add_flag("--literal-smoothing", literal, "use the unnormalized weight convention");
    cmd_smooth->add_option("--format", format, "text|json");
    cmd_smooth->add_option("--out", out, "output path or - for stdout");

    auto* cmd_npml = app.add_subcommand("npml", "discrete mixture fit and boundary LR test");
    add_input(cmd_npml);
    cmd_npml->add_option("--alpha", em_cfg.select_alpha, "LR level for dropping support (1 keeps all)");
    cmd_npml->add_option("--merge-tol", em_cfg.merge_tol, "atom merge distance");
    cmd_npml->add_option("--prune-tol", em_cfg.prune_tol, "mass pruning threshold");
    cmd_npml->add_option("--max-iter", em_cfg.max_iters, "EM iteration cap per run");
    cmd_npml->add_option("--max-atoms", em_cfg.max_atoms, "force the support down to this size");
    cmd_npml->add_option("--format", format, "text|json");
    cmd_npml->add_option("--out", out, "output path or - for stdout");

    auto* cmd_logit = app.add_subcommand("mixedlogit", "random-intercept logistic regression");
    cmd_logit->add_option("--input", input, "cohort CSV file")->required();
    cmd_logit->add_option("--experience", experience, "gt6|years|log")
        ->check(CLI::IsMember({"gt6", "years", "log"}));
    cmd_logit->add_option("--nodes", nodes, "Gauss-Hermite nodes (default 16)");
    cmd_logit->add_option("--format", format, "text|json");
    cmd_logit->add_option("--out", out, "output path or - for stdout");

    auto* cmd_sim = app.add_subcommand("simtest", "pooled-null lineup simulation");
    add_input(cmd_sim);
    cmd_sim->add_option("--seed", seed, "simulation seed")->required();
    cmd_sim->add_option("--replicates", replicates, "simulated panels (default 3)");
    cmd_sim->add_option("--order-rule", order_rule, "descending|fixed");
    cmd_sim->add_flag("--fixed-observed-position", observed_first,
                      "pin the observed matrix to the first panel");
    cmd_sim->add_option("--out-dir", out_dir, "directory for lineup.svg and answer.json");

    auto* cmd_repro = app.add_subcommand("reproduce", "recompute the embedded reference results");
    cmd_repro->add_option("--format", format, "text|json");
    cmd_repro->add_option("--out", out, "output path or - for stdout");

    auto* cmd_export = app.add_subcommand("export-data", "write an embedded cohort as CSV");
    cmd_export
        ->add_option("--cohort", cohort_name,
                     "dual_first_detection|cad_recall|cad_vs_dual_false_recall")
        ->required();
    cmd_export->add_option("--out", out, "output path or - for stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (cmd_zmatrix->parsed())
            return run_zmatrix(input, family, covariates, order, within_order, transpose, scale,
                               suppress_below, post_round, label, format, out, diagnostics_out,
                               density_out);
        if (cmd_shrink->parsed()) return run_shrink(input, family, covariates, format, out);
        if (cmd_smooth->parsed())
            return run_smooth(input, family, covariates, covariate, literal, format, out);
        if (cmd_npml->parsed()) return run_npml(input, family, covariates, em_cfg, format, out);
        if (cmd_logit->parsed()) return run_mixedlogit(input, experience, nodes, format, out);
        if (cmd_sim->parsed())
            return run_simtest(input, family, covariates, seed, replicates, order_rule,
                               observed_first, out_dir);
        if (cmd_repro->parsed()) return run_reproduce(format, out);
        if (cmd_export->parsed()) return run_export(cohort_name, out);
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << "\n";
        return exit_usage;
    } catch (const ConvergenceFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_convergence;
    } catch (const zmx::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_convergence;
    }
    return 0;
}
