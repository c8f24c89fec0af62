// dfext: command-line front end.  Argument parsing only; the commands live in
// the library (dfext/cli.hpp).

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dfext/cli.hpp"
#include "dfext/extend_l1.hpp"

using namespace dfext;

int main(int argc, char** argv) {
    CLI::App app{"Divergence-free extension of vector fields"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    cli::Overrides ov;
    std::uint64_t seed = 0;
    int quad_order = 0;
    std::string simplex, mode;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", config_path, "Run configuration (JSON)");
        if (needs_config) c->required();
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--seed", seed, "Random seed");
        sub->add_option("--quad-order", quad_order, "Gauss points per axis on the outer measures")->check(CLI::Range(1, 16));
        sub->add_option("--simplex", simplex, "Simplex variant")->check(CLI::IsMember({"flat", "curvilinear"}));
        sub->add_option("--mode", mode, "Extension operator")->check(CLI::IsMember({"l1", "w11"}));
    };

    auto* cover = app.add_subcommand("cover", "Build Whitney covers and check their invariants");
    add_common(cover, true);
    auto* extend = app.add_subcommand("extend", "Sample the extension on a grid");
    add_common(extend, true);
    auto* verify = app.add_subcommand("verify", "Run a verification suite");
    std::string suite;
    verify->add_option("suite", suite, "l1-core | w11-identities | cusp")->required();
    add_common(verify, true);
    auto* cex = app.add_subcommand("counterexample", "Cusp counterexample numbers");
    add_common(cex, false);
    cli::CounterexampleArgs ca;
    double p = 0.0, alpha = 0.0, control_p = 0.0;
    auto* gamma_opt = cex->add_option("--gamma", ca.gamma, "Hölder exponent in (0, 1)");
    auto* side_opt = cex->add_option("--side", ca.side, "plus | minus")->check(CLI::IsMember({"plus", "minus"}));
    auto* n_opt = cex->add_option("--dim", ca.n, "Dimension (minus side: 2 or 3)");
    auto* p_opt = cex->add_option("--p", p, "Integrability exponent");
    auto* alpha_opt = cex->add_option("--alpha", alpha, "Field exponent");
    auto* control_opt = cex->add_option("--control-p", control_p, "Out-of-window exponent for the control case");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kConfigError;
    }
    auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
    CLI::App* active = app.get_subcommands().front();
    if (given(active, "--seed")) ov.seed = seed;
    if (given(active, "--quad-order")) ov.quad_order = quad_order;
    if (given(active, "--simplex")) ov.simplex = simplex;
    if (given(active, "--mode")) ov.mode = mode;

    try {
        cli::CommandResult r;
        if (active == cex) {
            std::string hash;
            if (!config_path.empty()) {
                const cli::RunConfig cfg = cli::RunConfig::load(config_path, ov);
                const cli::CounterexampleArgs from = cli::CounterexampleArgs::from_json(
                    cfg.json.contains("counterexample") ? cfg.json["counterexample"] : nlohmann::json::object());
                hash = cfg.hash_hex();
                // Flags take precedence over the file.
                if (!gamma_opt->count()) ca.gamma = from.gamma;
                if (!side_opt->count()) ca.side = from.side;
                if (!n_opt->count()) ca.n = from.n;
                ca.p = from.p;
                ca.alpha = from.alpha;
                ca.control_p = from.control_p;
                ca.s_min = from.s_min;
                ca.flux_points = from.flux_points;
            }
            if (p_opt->count()) ca.p = p;
            if (alpha_opt->count()) ca.alpha = alpha;
            if (control_opt->count()) ca.control_p = control_p;
            r = cli::cmd_counterexample(ca, out_dir, hash);
        } else {
            const cli::RunConfig cfg = cli::RunConfig::load(config_path, ov);
            if (active == cover) r = cli::cmd_cover(cfg, out_dir);
            else if (active == extend) r = cli::cmd_extend(cfg, out_dir);
            else r = cli::cmd_verify(suite, cfg, out_dir);
        }
        std::cout << r.summary.dump(2) << "\n";
        return r.exit_code;
    } catch (const cli::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kConfigError;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kConfigError;
    } catch (const FieldError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kConfigError;
    } catch (const ExtensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return cli::kInvariantFailure;
    }
}
