#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cgan/corpus.hpp"
#include "cgan/errors.hpp"
#include "cgan/pipeline.hpp"
#include "cgan/util.hpp"

namespace fs = std::filesystem;
using namespace cgan;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string method;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    int epochs = 0;
};

void add_common(CLI::App* sub, CommonOpts& o, bool config_required) {
    auto* c = sub->add_option("--config", o.config_path, "run configuration (JSON)");
    if (config_required)
        c->required();
    sub->add_option("--method", o.method, "override the configured method");
    sub->add_option("--seed", o.seeds, "override the configured seeds (repeatable)");
    sub->add_option("--out", o.out_dir, "override the output directory");
    sub->add_option("--epochs", o.epochs, "override the configured epoch count");
}

RunConfig resolve(const CommonOpts& o) {
    RunConfig cfg = load_run_config(o.config_path);
    if (!o.method.empty())
        cfg.method = method_from_string(o.method);
    if (!o.seeds.empty())
        cfg.seeds = o.seeds;
    if (!o.out_dir.empty())
        cfg.out_dir = o.out_dir;
    if (o.epochs > 0)
        cfg.hyper.epochs = o.epochs;
    cfg.validate();
    return cfg;
}

int run_stage_for_seeds(const CommonOpts& o, void (*fn)(const PipelineContext&)) {
    RunConfig cfg = resolve(o);
    for (std::uint64_t seed : cfg.seeds) {
        PipelineContext ctx = make_context(cfg, seed);
        fs::create_directories(ctx.dir);
        fn(ctx);
        std::printf("%s seed %llu: done, artifacts in %s\n", to_string(cfg.method),
                    static_cast<unsigned long long>(seed), ctx.dir.string().c_str());
    }
    return 0;
}

void print_run_summaries(const RunConfig& cfg) {
    for (std::uint64_t seed : cfg.seeds) {
        const auto dir = artifact_dir_for(cfg, seed);
        try {
            ValidationReport r = read_validation_report_json(dir / "validation" / "report.json");
            std::printf("%s seed %llu: %d good of %d generated (%s)\n", r.method.c_str(),
                        static_cast<unsigned long long>(seed), r.good, r.total, dir.string().c_str());
        } catch (const Error&) {
            std::printf("%s seed %llu: no validation report in %s\n", to_string(cfg.method),
                        static_cast<unsigned long long>(seed), dir.string().c_str());
        }
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-domain GAN pipeline for ternary hydride candidates"};
    app.require_subcommand(1);

    // make-corpus
    CorpusSpec corpus;
    std::string corpus_out;
    std::string corpus_proto = "rocksalt";
    auto* sc_corpus = app.add_subcommand("make-corpus", "write a synthetic POSCAR corpus");
    sc_corpus->add_option("--out", corpus_out, "output directory")->required();
    sc_corpus->add_option("--prototype", corpus_proto, "rocksalt or fluorite");
    sc_corpus->add_option("--metal", corpus.metal, "metal element symbol");
    sc_corpus->add_option("--a-min", corpus.a_min, "smallest cubic cell length (A)");
    sc_corpus->add_option("--a-max", corpus.a_max, "largest cubic cell length (A)");
    sc_corpus->add_option("--count", corpus.count, "number of structures");
    sc_corpus->add_option("--jitter", corpus.jitter, "fractional coordinate noise amplitude");
    sc_corpus->add_option("--seed", corpus.seed, "random seed");

    // pipeline stages + full run
    CommonOpts run_opts, enc_opts, t1_opts, tr_opts, t2_opts, gen_opts, val_opts, pdf_opts;
    auto* sc_run = app.add_subcommand("run", "run the full pipeline for every configured seed");
    add_common(sc_run, run_opts, true);
    auto* sc_encode = app.add_subcommand("encode", "load both domains and store the encoded datasets");
    add_common(sc_encode, enc_opts, true);
    auto* sc_t1 = app.add_subcommand("train-step1", "train the first cross-domain step");
    add_common(sc_t1, t1_opts, true);
    auto* sc_tr = app.add_subcommand("transfer", "build the ternary training sets by feature transfer");
    add_common(sc_tr, tr_opts, true);
    auto* sc_t2 = app.add_subcommand("train-step2", "train the second, geometry-aware step");
    add_common(sc_t2, t2_opts, true);
    auto* sc_gen = app.add_subcommand("generate", "generate candidate structures from the trained model");
    add_common(sc_gen, gen_opts, true);

    // validate: staged (--config) or standalone (--in)
    auto* sc_val = app.add_subcommand("validate", "check candidate structures against the distance rules");
    add_common(sc_val, val_opts, false);
    std::string val_in, val_report_dir;
    double val_d1 = 1.8, val_d2 = 3.0, val_cutoff = 8.0;
    bool val_any_arity = false;
    sc_val->add_option("--in", val_in, "directory of POSCAR files to check (standalone mode)");
    sc_val->add_option("--d1", val_d1, "smallest allowed first-neighbor distance (A)");
    sc_val->add_option("--d2", val_d2, "largest allowed first-neighbor distance (A)");
    sc_val->add_option("--cutoff", val_cutoff, "neighbor search cutoff (A)");
    sc_val->add_flag("--any-arity", val_any_arity, "accept structures with fewer than three species");
    sc_val->add_option("--report-dir", val_report_dir, "also write report.txt and report.json here");

    // pdf: staged (--config) or standalone (--in)
    auto* sc_pdf = app.add_subcommand("pdf", "histogram the pairwise distances of structures");
    add_common(sc_pdf, pdf_opts, false);
    std::string pdf_in, pdf_out;
    double pdf_bin = 0.1, pdf_cutoff = 8.0;
    sc_pdf->add_option("--in", pdf_in, "POSCAR file or directory (standalone mode)");
    sc_pdf->add_option("--bin-width", pdf_bin, "histogram bin width (A)");
    sc_pdf->add_option("--cutoff", pdf_cutoff, "largest distance to count (A)");
    sc_pdf->add_option("--pdf-out", pdf_out, "directory for the .tsv files");

    // report
    auto* sc_rep = app.add_subcommand("report", "aggregate validation results into a comparison table");
    std::vector<std::string> rep_dirs;
    std::string rep_runs, rep_json, rep_text;
    sc_rep->add_option("dirs", rep_dirs, "artifact directories to aggregate");
    sc_rep->add_option("--runs", rep_runs, "aggregate every artifact directory under this root");
    sc_rep->add_option("--json", rep_json, "write the table as JSON here");
    sc_rep->add_option("--text", rep_text, "write the rendered table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(sc_corpus)) {
            if (corpus_proto == "rocksalt")
                corpus.prototype = Prototype::rocksalt;
            else if (corpus_proto == "fluorite")
                corpus.prototype = Prototype::fluorite;
            else
                throw ConfigError("unknown prototype '" + corpus_proto + "' (expected rocksalt or fluorite)");
            make_synthetic_corpus(corpus, corpus_out);
            std::printf("wrote %d structures to %s\n", corpus.count, corpus_out.c_str());
            return 0;
        }
        if (app.got_subcommand(sc_run)) {
            RunConfig cfg = resolve(run_opts);
            run_pipeline(cfg);
            print_run_summaries(cfg);
            return 0;
        }
        if (app.got_subcommand(sc_encode))
            return run_stage_for_seeds(enc_opts, stage_encode);
        if (app.got_subcommand(sc_t1))
            return run_stage_for_seeds(t1_opts, stage_train_step1);
        if (app.got_subcommand(sc_tr))
            return run_stage_for_seeds(tr_opts, stage_transfer);
        if (app.got_subcommand(sc_t2))
            return run_stage_for_seeds(t2_opts, stage_train_step2);
        if (app.got_subcommand(sc_gen))
            return run_stage_for_seeds(gen_opts, stage_generate);

        if (app.got_subcommand(sc_val)) {
            if (!val_in.empty()) {
                GeoConfig geo;
                geo.d1 = val_d1;
                geo.d2 = val_d2;
                geo.cutoff = val_cutoff;
                if (!(geo.d1 > 0.0) || !(geo.d2 > geo.d1))
                    throw ConfigError("need 0 < d1 < d2");
                ValidationReport r = validate_directory(val_in, geo, !val_any_arity);
                std::fputs(render_validation_report(r).c_str(), stdout);
                if (!val_report_dir.empty())
                    write_validation_report(val_report_dir, r);
                return 0;
            }
            if (val_opts.config_path.empty())
                throw ConfigError("validate needs either --config or --in");
            return run_stage_for_seeds(val_opts, stage_validate);
        }

        if (app.got_subcommand(sc_pdf)) {
            if (!pdf_in.empty()) {
                if (!(pdf_bin > 0.0) || !(pdf_cutoff > 0.0))
                    throw ConfigError("bin width and cutoff must be positive");
                std::vector<fs::path> inputs;
                if (fs::is_directory(pdf_in)) {
                    for (const auto& p : list_files_sorted(pdf_in))
                        if (p.extension() == ".poscar")
                            inputs.push_back(p);
                } else {
                    inputs.push_back(pdf_in);
                }
                if (inputs.empty())
                    throw ConfigError("no POSCAR files under " + pdf_in);
                for (const auto& p : inputs) {
                    CrystalStructure s = parse_poscar(read_text_file(p));
                    Histogram h = pair_distribution(s, pdf_bin, pdf_cutoff);
                    if (pdf_out.empty()) {
                        std::printf("# %s\n%s", p.string().c_str(), histogram_tsv(h).c_str());
                    } else {
                        fs::create_directories(pdf_out);
                        write_text_file(fs::path(pdf_out) / (p.stem().string() + ".tsv"), histogram_tsv(h));
                    }
                }
                return 0;
            }
            if (pdf_opts.config_path.empty())
                throw ConfigError("pdf needs either --config or --in");
            return run_stage_for_seeds(pdf_opts, stage_pdf);
        }

        if (app.got_subcommand(sc_rep)) {
            std::vector<fs::path> dirs;
            for (const auto& d : rep_dirs)
                dirs.push_back(d);
            if (!rep_runs.empty()) {
                std::vector<fs::path> found;
                for (const auto& entry : fs::directory_iterator(rep_runs))
                    if (entry.is_directory() && fs::exists(entry.path() / "validation" / "report.json"))
                        found.push_back(entry.path());
                std::sort(found.begin(), found.end());
                dirs.insert(dirs.end(), found.begin(), found.end());
            }
            if (dirs.empty())
                throw ConfigError("report needs artifact directories (positional or --runs)");
            ComparisonReport rep = build_comparison(dirs);
            std::string table = render_comparison(rep);
            std::fputs(table.c_str(), stdout);
            if (!rep_json.empty())
                write_text_file(rep_json, comparison_to_json_text(rep));
            if (!rep_text.empty())
                write_text_file(rep_text, table);
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
