#include "odsd/cli.hpp"

#include <cstdio>
#include <optional>

#include <CLI11.hpp>

#include "odsd/config.hpp"
#include "odsd/error.hpp"
#include "odsd/gradcheck.hpp"
#include "odsd/pipeline.hpp"

namespace odsd::cli {

namespace {

struct CommonArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* copt = cmd->add_option("--config", args.config, "experiment config file");
    if (config_required) copt->required();
    cmd->add_option("--seed", args.seed, "override every config seed");
    cmd->add_option("--out", args.out, "override paths.out");
}

ExperimentConfig resolve(const CommonArgs& args) {
    ExperimentConfig cfg = args.config.empty() ? ExperimentConfig{} : load_config(args.config);
    if (args.seed) {
        cfg.train.seed = *args.seed;
        cfg.aps.seed = *args.seed;
        cfg.synth.seed = *args.seed;
        cfg.aug.spec.seed = *args.seed;
    }
    if (args.out) cfg.paths.out = *args.out;
    return cfg;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"open-world pool scoring and relational distillation"};
    app.require_subcommand(1);

    CommonArgs synth_args, teacher_args, score_args, sample_args, distill_args, eval_args,
        embed_args, grad_args;
    bool resume = false;
    GradcheckOptions grad_opts;

    add_common(app.add_subcommand("synth", "generate the benchmark datasets"), synth_args);
    add_common(app.add_subcommand("train-teacher", "train the teacher on labeled data"),
               teacher_args);
    add_common(app.add_subcommand("score", "score the unlabeled pool with the teacher"),
               score_args);
    add_common(app.add_subcommand("sample", "select the training subset from scores"),
               sample_args);
    auto* distill =
        app.add_subcommand("distill", "train the student against the teacher on the selection");
    add_common(distill, distill_args);
    distill->add_flag("--resume", resume, "continue from the saved distill state");
    add_common(app.add_subcommand("eval", "report checkpoint accuracy on the test set"),
               eval_args);
    add_common(app.add_subcommand("embed", "export teacher and student spectral embeddings"),
               embed_args);

    auto* grad = app.add_subcommand("gradcheck", "finite-difference checks of every gradient");
    add_common(grad, grad_args, false);
    grad->add_option("--batches", grad_opts.batches, "random fixtures per term");
    grad->add_option("--corrupt", grad_opts.corrupt,
                     "inject a wrong analytic gradient for this term (self-test)");
    grad->add_flag("--repeated-eig", grad_opts.repeated_eig_fixture,
                   "use the repeated-eigenvalue fixture (drives the gap guard)");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand("synth")) {
            cmd_synth(resolve(synth_args));
        } else if (app.got_subcommand("train-teacher")) {
            cmd_train_teacher(resolve(teacher_args));
        } else if (app.got_subcommand("score")) {
            cmd_score(resolve(score_args));
        } else if (app.got_subcommand("sample")) {
            cmd_sample(resolve(sample_args));
        } else if (app.got_subcommand("distill")) {
            cmd_distill(resolve(distill_args), resume);
        } else if (app.got_subcommand("eval")) {
            cmd_eval(resolve(eval_args));
        } else if (app.got_subcommand("embed")) {
            cmd_embed(resolve(embed_args));
        } else if (app.got_subcommand("gradcheck")) {
            if (grad_args.seed) grad_opts.seed = *grad_args.seed;
            const GradcheckReport report = run_gradcheck(grad_opts);
            print_gradcheck(report);
            return report.ok() ? 0 : 1;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace odsd::cli
