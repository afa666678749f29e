// jblcsm: fit, score, export rate curves and run the simulation study.

#include <iostream>

#include <CLI11.hpp>

#include "jblcsm/commands.hpp"
#include "jblcsm/io.hpp"

namespace {

struct Flags {
    std::string data, fit_file, model, expression, framework, conditions, out, grid, config;
    std::uint64_t seed = 0;
    std::size_t reps = 0;
    unsigned threads = 0;
    int restarts = 0, max_iterations = 0;
    bool dry_run = false, export_data = false;
};

void add_common(CLI::App* sub, Flags& f)
{
    sub->add_option("--config", f.config, "JSON config file; flags override its values");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--restarts", f.restarts, "maximum optimizer restarts");
    sub->add_option("--max-iterations", f.max_iterations, "optimizer iteration limit");
}

void add_model(CLI::App* sub, Flags& f)
{
    sub->add_option("--model", f.model, "full or reduced")->check(CLI::IsMember({"full", "reduced"}));
    sub->add_option("--expression", f.expression, "midpoint or endpoint")
        ->check(CLI::IsMember({"midpoint", "endpoint"}));
    sub->add_option("--framework", f.framework, "lcsm or lgc")->check(CLI::IsMember({"lcsm", "lgc"}));
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Jenss-Bayley latent change score models"};
    app.require_subcommand(1);
    Flags f;

    auto* fit = app.add_subcommand("fit", "fit a model to wide CSV data");
    fit->add_option("--data", f.data, "wide CSV: id,y1..yJ,t1..tJ");
    add_model(fit, f);
    add_common(fit, f);

    auto* scores = app.add_subcommand("scores", "factor scores and individual rates");
    scores->add_option("--data", f.data, "wide CSV: id,y1..yJ,t1..tJ");
    scores->add_option("--fit", f.fit_file, "fit.json from an earlier fit; otherwise fits in place");
    add_model(scores, f);
    add_common(scores, f);

    auto* rates = app.add_subcommand("rates", "mean rate curve with a 95% band");
    rates->add_option("--data", f.data, "wide CSV: id,y1..yJ,t1..tJ");
    rates->add_option("--fit", f.fit_file, "fit.json from an earlier fit; otherwise fits in place");
    rates->add_option("--grid", f.grid, "start:stop:step or comma-separated times");
    add_model(rates, f);
    add_common(rates, f);

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study over the condition grid");
    sim->add_option("--reps", f.reps, "convergent replications per condition");
    sim->add_option("--conditions", f.conditions, "all, or indices/ranges such as 0,4,10-12");
    sim->add_option("--threads", f.threads, "parallel replications (default JBLCSM_THREADS or all cores)");
    sim->add_flag("--dry-run", f.dry_run, "only create the condition directories and manifests");
    sim->add_flag("--export-data", f.export_data, "write the first generated dataset of each condition");
    add_common(sim, f);

    CLI11_PARSE(app, argc, argv);

    CLI::App* active = app.get_subcommands().front();
    const auto given = [&](const char* name) {
        try {
            return active->get_option(name)->count() > 0;
        } catch (const CLI::OptionNotFound&) {
            return false;
        }
    };

    jblcsm::RunConfig c;
    try {
        if (given("--config"))
            c = jblcsm::load_config_file(f.config);
    } catch (const jblcsm::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return jblcsm::exit_input_error;
    }
    c.command = active->get_name();
    if (given("--data")) c.data = f.data;
    if (given("--fit")) c.fit_file = f.fit_file;
    if (given("--model")) c.model = f.model;
    if (given("--expression")) c.expression = f.expression;
    if (given("--framework")) c.framework = f.framework;
    if (given("--seed")) c.seed = f.seed;
    if (given("--reps")) c.reps = f.reps;
    if (given("--conditions")) c.conditions = f.conditions;
    if (given("--out")) c.out = f.out;
    if (given("--grid")) c.grid = f.grid;
    if (given("--threads")) c.threads = f.threads;
    if (given("--restarts")) c.restarts = f.restarts;
    if (given("--max-iterations")) c.max_iterations = f.max_iterations;
    if (given("--dry-run")) c.dry_run = f.dry_run;
    if (given("--export-data")) c.export_data = f.export_data;
    return jblcsm::run_command(c);
}
