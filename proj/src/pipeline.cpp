#include "cgan/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "cgan/corpus.hpp"
#include "cgan/errors.hpp"
#include "cgan/util.hpp"

namespace cgan {

using nlohmann::json;

const char* to_string(Method m) {
    switch (m) {
    case Method::crystalgan: return "crystalgan";
    case Method::crystalgan_noconstraints: return "crystalgan_noconstraints";
    case Method::discogan: return "discogan";
    case Method::classic_gan: return "classic_gan";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "crystalgan") return Method::crystalgan;
    if (s == "crystalgan_noconstraints") return Method::crystalgan_noconstraints;
    if (s == "discogan") return Method::discogan;
    if (s == "classic_gan") return Method::classic_gan;
    throw ConfigError("unknown method '" + s +
                      "' (expected crystalgan, crystalgan_noconstraints, discogan or classic_gan)");
}

void RunConfig::validate() const {
    if (domain_a_dir.empty() || domain_b_dir.empty())
        throw ConfigError("both domain directories must be set");
    if (out_dir.empty())
        throw ConfigError("out_dir must be set");
    make_slot_map(element_a, element_b); // throws on bad element symbols
    if (element_a.empty() || element_b.empty())
        throw ConfigError("both element symbols must be set");
    if (seeds.empty())
        throw ConfigError("at least one seed is required");
    hyper.validate(0, 0);
    if (checkpoint_interval < 0)
        throw ConfigError("checkpoint_interval cannot be negative");
    if (!(pdf_bin_width > 0.0))
        throw ConfigError("pdf_bin_width must be positive");
}

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const char* where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k)
                ok = true;
        if (!ok)
            throw ConfigError(std::string("unknown key '") + it.key() + "' in " + where);
    }
}

json geo_to_json(const GeoConfig& g) {
    json j;
    j["d1"] = g.d1;
    j["d2"] = g.d2;
    j["cutoff"] = g.cutoff;
    if (!g.penalized.empty()) {
        json pairs = json::array();
        for (const SpeciesPair& p : g.penalized)
            pairs.push_back({p.first, p.second});
        j["penalized"] = std::move(pairs);
    }
    return j;
}

GeoConfig geo_from_json(const json& j) {
    GeoConfig g;
    reject_unknown_keys(j, {"d1", "d2", "cutoff", "penalized"}, "geo");
    g.d1 = j.value("d1", g.d1);
    g.d2 = j.value("d2", g.d2);
    g.cutoff = j.value("cutoff", g.cutoff);
    if (j.contains("penalized")) {
        for (const json& p : j.at("penalized")) {
            if (!p.is_array() || p.size() != 2)
                throw ConfigError("penalized pairs must be two-element arrays");
            g.penalized.insert(make_species_pair(p[0].get<std::string>(), p[1].get<std::string>()));
        }
    }
    return g;
}

json hyper_to_json(const HyperParams& h) {
    json j;
    j["lambdas"] = h.lambdas;
    j["metric"] = to_string(h.metric);
    j["adam"] = {{"alpha", h.adam.alpha}, {"beta1", h.adam.beta1}, {"beta2", h.adam.beta2}, {"epsilon", h.adam.epsilon}};
    j["epochs"] = h.epochs;
    j["batch_size"] = h.batch_size;
    j["hidden_dims"] = h.hidden_dims;
    j["geo"] = geo_to_json(h.geo);
    j["geo_mode"] = to_string(h.geo_mode);
    j["decode_threshold"] = h.decode_threshold;
    return j;
}

HyperParams hyper_from_json(const json& j) {
    HyperParams h;
    reject_unknown_keys(
        j, {"lambdas", "metric", "adam", "epochs", "batch_size", "hidden_dims", "geo", "geo_mode", "decode_threshold"},
        "hyper");
    if (j.contains("lambdas")) {
        auto v = j.at("lambdas").get<std::vector<double>>();
        if (v.size() != 6)
            throw ConfigError("lambdas must have exactly 6 entries");
        std::copy(v.begin(), v.end(), h.lambdas.begin());
    }
    if (j.contains("metric"))
        h.metric = metric_from_string(j.at("metric").get<std::string>());
    if (j.contains("adam")) {
        const json& a = j.at("adam");
        reject_unknown_keys(a, {"alpha", "beta1", "beta2", "epsilon"}, "adam");
        h.adam.alpha = a.value("alpha", h.adam.alpha);
        h.adam.beta1 = a.value("beta1", h.adam.beta1);
        h.adam.beta2 = a.value("beta2", h.adam.beta2);
        h.adam.epsilon = a.value("epsilon", h.adam.epsilon);
    }
    h.epochs = j.value("epochs", h.epochs);
    h.batch_size = j.value("batch_size", h.batch_size);
    if (j.contains("hidden_dims"))
        h.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
    if (j.contains("geo"))
        h.geo = geo_from_json(j.at("geo"));
    if (j.contains("geo_mode"))
        h.geo_mode = geo_mode_from_string(j.at("geo_mode").get<std::string>());
    h.decode_threshold = j.value("decode_threshold", h.decode_threshold);
    return h;
}

} // namespace

RunConfig run_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config must be a JSON object");
    reject_unknown_keys(j,
                        {"domain_a_dir", "domain_b_dir", "out_dir", "element_a", "element_b", "method", "seed", "seeds",
                         "hyper", "checkpoint_interval", "pdf_bin_width"},
                        "config");
    RunConfig cfg;
    try {
        cfg.domain_a_dir = j.at("domain_a_dir").get<std::string>();
        cfg.domain_b_dir = j.at("domain_b_dir").get<std::string>();
        cfg.element_a = j.at("element_a").get<std::string>();
        cfg.element_b = j.at("element_b").get<std::string>();
        cfg.out_dir = std::filesystem::path(j.value("out_dir", std::string("runs")));
        if (j.contains("method"))
            cfg.method = method_from_string(j.at("method").get<std::string>());
        if (j.contains("seeds") && j.contains("seed"))
            throw ConfigError("give either 'seed' or 'seeds', not both");
        if (j.contains("seeds"))
            cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        else if (j.contains("seed"))
            cfg.seeds = {j.at("seed").get<std::uint64_t>()};
        if (j.contains("hyper"))
            cfg.hyper = hyper_from_json(j.at("hyper"));
        cfg.checkpoint_interval = j.value("checkpoint_interval", 0);
        cfg.pdf_bin_width = j.value("pdf_bin_width", 0.1);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return run_config_from_json_text(read_text_file(path));
}

std::string run_config_to_json_text(const RunConfig& cfg) {
    json j;
    j["domain_a_dir"] = cfg.domain_a_dir.string();
    j["domain_b_dir"] = cfg.domain_b_dir.string();
    j["out_dir"] = cfg.out_dir.string();
    j["element_a"] = cfg.element_a;
    j["element_b"] = cfg.element_b;
    j["method"] = to_string(cfg.method);
    j["seeds"] = cfg.seeds;
    j["hyper"] = hyper_to_json(cfg.hyper);
    j["checkpoint_interval"] = cfg.checkpoint_interval;
    j["pdf_bin_width"] = cfg.pdf_bin_width;
    return j.dump(1);
}

std::filesystem::path artifact_dir_for(const RunConfig& cfg, std::uint64_t seed) {
    return cfg.out_dir / (std::string(to_string(cfg.method)) + "_seed" + std::to_string(seed));
}

PipelineContext make_context(const RunConfig& cfg, std::uint64_t seed) {
    PipelineContext ctx;
    ctx.cfg = cfg;
    ctx.seed = seed;
    ctx.dir = artifact_dir_for(cfg, seed);
    ctx.cfg.hyper.seed = seed;
    if (cfg.method == Method::crystalgan_noconstraints) {
        ctx.cfg.hyper.lambdas[4] = 0.0;
        ctx.cfg.hyper.lambdas[5] = 0.0;
        ctx.cfg.hyper.geo_mode = GeoMode::off;
    }
    return ctx;
}

namespace {

json load_manifest(const PipelineContext& ctx) {
    const auto path = ctx.dir / "manifest.json";
    json j;
    if (std::filesystem::exists(path)) {
        try {
            j = json::parse(read_text_file(path));
        } catch (const json::exception&) {
            j = json::object();
        }
    }
    if (!j.is_object())
        j = json::object();
    if (!j.contains("config")) {
        j["config"] = json::parse(run_config_to_json_text(ctx.cfg));
        j["method"] = to_string(ctx.cfg.method);
        j["seed"] = ctx.seed;
        j["system"] = ctx.cfg.element_a + "-" + ctx.cfg.element_b + "-H";
    }
    return j;
}

void save_manifest(const PipelineContext& ctx, const json& j) {
    write_text_file(ctx.dir / "manifest.json", j.dump(1));
}

std::string checksum_hex(std::uint64_t v) {
    return hex_u64(v);
}

HyperParams hp_for(const PipelineContext& ctx) {
    HyperParams hp = ctx.cfg.hyper;
    hp.seed = ctx.seed;
    return hp;
}

DomainDataset load_stage_dataset(const PipelineContext& ctx, const char* rel) {
    const auto path = ctx.dir / rel;
    if (!std::filesystem::exists(path))
        throw StageError(std::string("missing ") + rel + "; run the earlier stages first");
    return load_dataset_json(path);
}

GanStepModel load_stage_model(const PipelineContext& ctx, const char* rel) {
    const auto path = ctx.dir / rel;
    if (!std::filesystem::exists(path))
        throw StageError(std::string("missing ") + rel + "; run the earlier stages first");
    return load_model(path);
}

EpochCallback checkpoint_callback(const PipelineContext& ctx, const std::filesystem::path& stage_dir) {
    const int interval = ctx.cfg.checkpoint_interval;
    const int total = ctx.cfg.hyper.epochs;
    if (interval <= 0)
        return {};
    return [interval, total, stage_dir](const GanStepModel& m, int epoch) {
        if (epoch % interval == 0 && epoch != total) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_epoch%05d.bin", epoch);
            save_model(stage_dir / name, m);
        }
    };
}

} // namespace

void stage_encode(const PipelineContext& ctx) {
    SlotMap slot_map = make_slot_map(ctx.cfg.element_a, ctx.cfg.element_b);
    DomainDataset ds_ah = load_domain_dataset(ctx.cfg.domain_a_dir, DomainTag::ah, slot_map);
    DomainDataset ds_bh = load_domain_dataset(ctx.cfg.domain_b_dir, DomainTag::bh, slot_map);

    std::filesystem::create_directories(ctx.dir / "datasets");
    save_dataset_json(ctx.dir / "datasets" / "ah.json", ds_ah);
    save_dataset_json(ctx.dir / "datasets" / "bh.json", ds_bh);

    json m = load_manifest(ctx);
    m["datasets"] = {{"ah", {{"count", ds_ah.size()}, {"checksum", checksum_hex(dataset_checksum(ds_ah))}}},
                     {"bh", {{"count", ds_bh.size()}, {"checksum", checksum_hex(dataset_checksum(ds_bh))}}}};
    save_manifest(ctx, m);
}

void stage_train_step1(const PipelineContext& ctx) {
    DomainDataset ds_ah = load_stage_dataset(ctx, "datasets/ah.json");
    DomainDataset ds_bh = load_stage_dataset(ctx, "datasets/bh.json");
    HyperParams hp = hp_for(ctx);

    std::filesystem::create_directories(ctx.dir / "step1");
    GanStepModel model;
    TrainLog log;
    if (ctx.cfg.method == Method::classic_gan) {
        model = classic_train(ds_ah, ds_bh, hp, &log, checkpoint_callback(ctx, ctx.dir / "step1"));
    } else {
        const DomainDataset* sets[] = {&ds_ah, &ds_bh};
        Normalizer norm = Normalizer::fit(sets);
        model = make_step_model(StepTag::step1, hp, norm, ctx.cfg.element_a, ctx.cfg.element_b);
        log = train_step(model, ds_ah, ds_bh, hp, checkpoint_callback(ctx, ctx.dir / "step1"));
    }
    save_model(ctx.dir / "step1" / "checkpoint.bin", model);
    write_trainlog_csv(ctx.dir / "step1" / "trainlog.csv", log);

    json m = load_manifest(ctx);
    m["models"]["step1"] = {{"checksum", checksum_hex(model_checksum(model))},
                            {"epochs", model.epoch},
                            {"wall_seconds", log.wall_seconds},
                            {"kind", ctx.cfg.method == Method::classic_gan ? "classic" : "cross_domain"}};
    m["normalizer"] = {{"lattice_shift", {model.norm.lattice_shift(0), model.norm.lattice_shift(1), model.norm.lattice_shift(2)}},
                       {"lattice_scale", {model.norm.lattice_scale(0), model.norm.lattice_scale(1), model.norm.lattice_scale(2)}}};
    save_manifest(ctx, m);
}

void stage_transfer(const PipelineContext& ctx) {
    if (ctx.cfg.method == Method::discogan || ctx.cfg.method == Method::classic_gan)
        throw StageError("feature transfer only exists for the two-step methods");
    DomainDataset ds_ah = load_stage_dataset(ctx, "datasets/ah.json");
    DomainDataset ds_bh = load_stage_dataset(ctx, "datasets/bh.json");
    GanStepModel step1 = load_stage_model(ctx, "step1/checkpoint.bin");

    TransferOutcome out = build_step2_datasets(ds_ah, ds_bh, step1, ctx.cfg.hyper.decode_threshold);

    std::filesystem::create_directories(ctx.dir / "transfer");
    save_dataset_json(ctx.dir / "transfer" / "ahbg.json", out.ahbg);
    save_dataset_json(ctx.dir / "transfer" / "bhag.json", out.bhag);
    json drops;
    drops["dropped_ah"] = out.dropped_ah;
    drops["dropped_bh"] = out.dropped_bh;
    drops["log"] = out.drop_log;
    write_text_file(ctx.dir / "transfer" / "drops.json", drops.dump(1));

    json m = load_manifest(ctx);
    m["transfer"] = {{"kept_ahbg", out.ahbg.size()},
                     {"kept_bhag", out.bhag.size()},
                     {"dropped_ah", out.dropped_ah},
                     {"dropped_bh", out.dropped_bh}};
    save_manifest(ctx, m);
}

void stage_train_step2(const PipelineContext& ctx) {
    if (ctx.cfg.method == Method::discogan || ctx.cfg.method == Method::classic_gan)
        throw StageError("step 2 only exists for the two-step methods");
    DomainDataset ds_ahbg = load_stage_dataset(ctx, "transfer/ahbg.json");
    DomainDataset ds_bhag = load_stage_dataset(ctx, "transfer/bhag.json");
    HyperParams hp = hp_for(ctx);
    if (hp.batch_size > std::min(ds_ahbg.size(), ds_bhag.size()))
        hp.batch_size = std::min(ds_ahbg.size(), ds_bhag.size()); // transfer may have dropped samples

    const DomainDataset* sets[] = {&ds_ahbg, &ds_bhag};
    Normalizer norm = Normalizer::fit(sets);
    GanStepModel model = make_step_model(StepTag::step2, hp, norm, ctx.cfg.element_a, ctx.cfg.element_b);

    std::filesystem::create_directories(ctx.dir / "step2");
    TrainLog log = train_step(model, ds_ahbg, ds_bhag, hp, checkpoint_callback(ctx, ctx.dir / "step2"));
    save_model(ctx.dir / "step2" / "checkpoint.bin", model);
    write_trainlog_csv(ctx.dir / "step2" / "trainlog.csv", log);

    json m = load_manifest(ctx);
    m["models"]["step2"] = {{"checksum", checksum_hex(model_checksum(model))},
                            {"epochs", model.epoch},
                            {"wall_seconds", log.wall_seconds},
                            {"geo_mode", to_string(hp.geo_mode)},
                            {"batch_size", hp.batch_size}};
    save_manifest(ctx, m);
}

void stage_generate(const PipelineContext& ctx) {
    std::vector<GeneratedSample> cands;
    std::uint64_t csum = 0;
    if (ctx.cfg.method == Method::classic_gan) {
        GanStepModel model = load_stage_model(ctx, "step1/checkpoint.bin");
        DomainDataset ds_ah = load_stage_dataset(ctx, "datasets/ah.json");
        DomainDataset ds_bh = load_stage_dataset(ctx, "datasets/bh.json");
        csum = model_checksum(model);
        cands = classic_generate(model, ds_ah.size() + ds_bh.size());
    } else if (ctx.cfg.method == Method::discogan) {
        GanStepModel model = load_stage_model(ctx, "step1/checkpoint.bin");
        DomainDataset ds_ah = load_stage_dataset(ctx, "datasets/ah.json");
        DomainDataset ds_bh = load_stage_dataset(ctx, "datasets/bh.json");
        csum = model_checksum(model);
        cands = generate(model, ds_ah, ds_ah.size());
        std::vector<GeneratedSample> back = generate(model, ds_bh, ds_bh.size());
        cands.insert(cands.end(), std::make_move_iterator(back.begin()), std::make_move_iterator(back.end()));
    } else {
        GanStepModel model = load_stage_model(ctx, "step2/checkpoint.bin");
        DomainDataset ds_ahbg = load_stage_dataset(ctx, "transfer/ahbg.json");
        DomainDataset ds_bhag = load_stage_dataset(ctx, "transfer/bhag.json");
        csum = model_checksum(model);
        cands = generate(model, ds_ahbg, ds_ahbg.size());
        std::vector<GeneratedSample> back = generate(model, ds_bhag, ds_bhag.size());
        cands.insert(cands.end(), std::make_move_iterator(back.begin()), std::make_move_iterator(back.end()));
    }

    const auto gen_dir = ctx.dir / "generated";
    std::filesystem::create_directories(gen_dir);

    json provenance = json::array();
    std::map<std::string, int> counters;
    int written = 0;
    for (const GeneratedSample& cand : cands) {
        int idx = counters[cand.direction]++;
        char name[64];
        std::snprintf(name, sizeof(name), "gen_%s_%03d.poscar", cand.direction.c_str(), idx);
        json rec;
        rec["direction"] = cand.direction;
        rec["index"] = idx;
        rec["source_index"] = cand.source_index;
        rec["source_file"] = cand.source_file;
        rec["pseudo_binary"] = cand.pseudo_binary;
        rec["model_checksum"] = checksum_hex(csum);
        try {
            CrystalStructure s = decode(cand.sample, ctx.cfg.hyper.decode_threshold);
            s.comment = std::string(to_string(ctx.cfg.method)) + " seed " + std::to_string(ctx.seed) + " " +
                        cand.direction + " " + std::to_string(idx);
            write_text_file(gen_dir / name, write_poscar(s));
            rec["file"] = name;
            ++written;
        } catch (const Error& err) {
            rec["file"] = nullptr;
            rec["error"] = err.what();
        }
        provenance.push_back(std::move(rec));
    }
    write_text_file(gen_dir / "provenance.json", provenance.dump(1));

    json m = load_manifest(ctx);
    m["generated"] = {{"candidates", static_cast<int>(cands.size())},
                      {"written", written},
                      {"decode_failures", static_cast<int>(cands.size()) - written},
                      {"model_checksum", checksum_hex(csum)}};
    save_manifest(ctx, m);
}

ValidationReport validate_directory(const std::filesystem::path& dir, const GeoConfig& geo, bool require_ternary,
                                    const std::filesystem::path& provenance) {
    ValidationReport rep;
    rep.require_ternary = require_ternary;
    rep.d1 = geo.d1;
    rep.d2 = geo.d2;

    for (const auto& path : list_files_sorted(dir)) {
        if (path.extension() != ".poscar")
            continue;
        ValidationEntry entry;
        entry.id = path.filename().string();
        try {
            CrystalStructure s = parse_poscar(read_text_file(path));
            entry.parsed = true;
            entry.verdict = validate_structure(s, geo);
        } catch (const Error& err) {
            entry.parsed = false;
            entry.error = err.what();
        }
        rep.entries.push_back(std::move(entry));
    }

    if (!provenance.empty() && std::filesystem::exists(provenance)) {
        json prov;
        try {
            prov = json::parse(read_text_file(provenance));
        } catch (const json::exception& e) {
            throw StageError("unreadable provenance file " + provenance.string() + ": " + e.what());
        }
        for (const json& rec : prov) {
            if (!rec.contains("file") || !rec["file"].is_null())
                continue;
            ValidationEntry entry;
            entry.id = "candidate " + rec.value("direction", std::string("?")) + " " +
                       std::to_string(rec.value("index", -1)) + " (not decodable)";
            entry.parsed = false;
            entry.error = rec.value("error", std::string("decode failed"));
            rep.entries.push_back(std::move(entry));
        }
    }

    rep.total = static_cast<int>(rep.entries.size());
    for (const ValidationEntry& entry : rep.entries) {
        if (!entry.parsed)
            continue;
        if (entry.verdict.good) {
            ++rep.good_any_arity;
            if (!require_ternary || entry.verdict.ternary)
                ++rep.good;
        }
    }
    return rep;
}

std::string render_validation_report(const ValidationReport& r) {
    auto fmt = [](double v, const char* spec) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), spec, v);
        return std::string(buf);
    };
    std::string out;
    out += "structure validation";
    if (!r.method.empty())
        out += " for " + r.method + " on " + r.system + " (seed " + std::to_string(r.seed) + ")";
    out += "\n";
    out += "distance window [" + fmt(r.d1, "%g") + ", " + fmt(r.d2, "%g") + "] A";
    out += r.require_ternary ? ", ternary required\n" : "\n";
    out += "\n";
    for (const ValidationEntry& e : r.entries) {
        if (!e.parsed) {
            out += e.id + "  UNREADABLE  " + e.error + "\n";
            continue;
        }
        out += e.id;
        out += e.verdict.good && (!r.require_ternary || e.verdict.ternary) ? "  GOOD  " : "  BAD   ";
        out += std::to_string(e.verdict.distinct_species) + " species";
        if (r.require_ternary && !e.verdict.ternary)
            out += " (not ternary)";
        for (const Violation& v : e.verdict.violations) {
            out += "; " + to_string(v.pair) + " " + fmt(v.distance, "%.4f") + (v.below ? " below" : " above") +
                   " (atoms " + std::to_string(v.i) + "," + std::to_string(v.j) + ")";
        }
        out += "\n";
    }
    out += "\n";
    out += "total " + std::to_string(r.total) + ", good " + std::to_string(r.good) + ", distance-ok ignoring arity " +
           std::to_string(r.good_any_arity) + "\n";
    return out;
}

namespace {

json verdict_to_json(const StructureVerdict& v) {
    json j;
    j["good"] = v.good;
    j["ternary"] = v.ternary;
    j["distinct_species"] = v.distinct_species;
    json viols = json::array();
    for (const Violation& viol : v.violations) {
        viols.push_back({{"i", viol.i},
                         {"j", viol.j},
                         {"image", viol.image},
                         {"pair", to_string(viol.pair)},
                         {"distance", viol.distance},
                         {"kind", viol.below ? "below" : "above"}});
    }
    j["violations"] = std::move(viols);
    return j;
}

StructureVerdict verdict_from_json(const json& j) {
    StructureVerdict v;
    v.good = j.at("good").get<bool>();
    v.ternary = j.at("ternary").get<bool>();
    v.distinct_species = j.at("distinct_species").get<int>();
    for (const json& viol : j.at("violations")) {
        Violation out;
        out.i = viol.at("i").get<int>();
        out.j = viol.at("j").get<int>();
        auto img = viol.at("image").get<std::vector<int>>();
        if (img.size() == 3)
            out.image = {img[0], img[1], img[2]};
        std::string pair = viol.at("pair").get<std::string>();
        auto dash = pair.find('-');
        out.pair = make_species_pair(pair.substr(0, dash), dash == std::string::npos ? "" : pair.substr(dash + 1));
        out.distance = viol.at("distance").get<double>();
        out.below = viol.at("kind").get<std::string>() == "below";
        v.violations.push_back(std::move(out));
    }
    return v;
}

} // namespace

void write_validation_report(const std::filesystem::path& dir, const ValidationReport& r) {
    std::filesystem::create_directories(dir);
    write_text_file(dir / "report.txt", render_validation_report(r));

    json j;
    j["method"] = r.method;
    j["system"] = r.system;
    j["seed"] = r.seed;
    j["require_ternary"] = r.require_ternary;
    j["d1"] = r.d1;
    j["d2"] = r.d2;
    j["total"] = r.total;
    j["good"] = r.good;
    j["good_any_arity"] = r.good_any_arity;
    json entries = json::array();
    for (const ValidationEntry& e : r.entries) {
        json je;
        je["id"] = e.id;
        je["parsed"] = e.parsed;
        je["error"] = e.error;
        if (e.parsed)
            je["verdict"] = verdict_to_json(e.verdict);
        entries.push_back(std::move(je));
    }
    j["structures"] = std::move(entries);
    write_text_file(dir / "report.json", j.dump(1));
}

ValidationReport read_validation_report_json(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw MissingReport("no validation report at " + path.string());
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw MissingReport("unreadable validation report " + path.string() + ": " + e.what());
    }
    ValidationReport r;
    try {
        r.method = j.at("method").get<std::string>();
        r.system = j.at("system").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.require_ternary = j.at("require_ternary").get<bool>();
        r.d1 = j.at("d1").get<double>();
        r.d2 = j.at("d2").get<double>();
        r.total = j.at("total").get<int>();
        r.good = j.at("good").get<int>();
        r.good_any_arity = j.at("good_any_arity").get<int>();
        for (const json& je : j.at("structures")) {
            ValidationEntry e;
            e.id = je.at("id").get<std::string>();
            e.parsed = je.at("parsed").get<bool>();
            e.error = je.at("error").get<std::string>();
            if (e.parsed)
                e.verdict = verdict_from_json(je.at("verdict"));
            r.entries.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        throw MissingReport("malformed validation report " + path.string() + ": " + e.what());
    }
    return r;
}

void stage_validate(const PipelineContext& ctx) {
    const auto gen_dir = ctx.dir / "generated";
    if (!std::filesystem::is_directory(gen_dir))
        throw StageError("missing generated/; run the generate stage first");
    ValidationReport rep =
        validate_directory(gen_dir, ctx.cfg.hyper.geo, true, gen_dir / "provenance.json");
    rep.method = to_string(ctx.cfg.method);
    rep.system = ctx.cfg.element_a + "-" + ctx.cfg.element_b + "-H";
    rep.seed = ctx.seed;
    write_validation_report(ctx.dir / "validation", rep);

    json m = load_manifest(ctx);
    m["validation"] = {{"total", rep.total}, {"good", rep.good}, {"good_any_arity", rep.good_any_arity}};
    save_manifest(ctx, m);
}

void stage_pdf(const PipelineContext& ctx) {
    const auto gen_dir = ctx.dir / "generated";
    if (!std::filesystem::is_directory(gen_dir))
        throw StageError("missing generated/; run the generate stage first");
    const auto pdf_dir = ctx.dir / "validation" / "pdf";
    std::filesystem::create_directories(pdf_dir);
    int count = 0;
    for (const auto& path : list_files_sorted(gen_dir)) {
        if (path.extension() != ".poscar")
            continue;
        try {
            CrystalStructure s = parse_poscar(read_text_file(path));
            Histogram h = pair_distribution(s, ctx.cfg.pdf_bin_width, ctx.cfg.hyper.geo.cutoff);
            write_text_file(pdf_dir / (path.stem().string() + ".tsv"), histogram_tsv(h));
            ++count;
        } catch (const Error&) {
            // unreadable candidates already show up in the validation report
        }
    }
    json m = load_manifest(ctx);
    m["pdf"] = {{"histograms", count}};
    save_manifest(ctx, m);
}

namespace {

struct StageDef {
    const char* name;
    void (*fn)(const PipelineContext&);
};

std::vector<StageDef> stages_for(Method m) {
    if (m == Method::crystalgan || m == Method::crystalgan_noconstraints)
        return {{"encode", stage_encode},     {"train-step1", stage_train_step1}, {"transfer", stage_transfer},
                {"train-step2", stage_train_step2}, {"generate", stage_generate}, {"validate", stage_validate},
                {"pdf", stage_pdf}};
    return {{"encode", stage_encode},
            {"train-step1", stage_train_step1},
            {"generate", stage_generate},
            {"validate", stage_validate},
            {"pdf", stage_pdf}};
}

void run_stage_checked(const PipelineContext& ctx, const StageDef& st) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        st.fn(ctx);
    } catch (const std::exception& err) {
        try {
            json m = load_manifest(ctx);
            m["stages"][st.name] = {{"status", "failed"}, {"error", err.what()}};
            save_manifest(ctx, m);
        } catch (...) {
        }
        throw StageError(std::string(st.name) + ": " + err.what());
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json m = load_manifest(ctx);
    m["stages"][st.name] = {{"status", "ok"}, {"wall_seconds", wall}};
    save_manifest(ctx, m);
}

} // namespace

std::filesystem::path run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    if (!std::filesystem::is_directory(cfg.domain_a_dir))
        throw ConfigError("domain_a_dir is not a directory: " + cfg.domain_a_dir.string());
    if (!std::filesystem::is_directory(cfg.domain_b_dir))
        throw ConfigError("domain_b_dir is not a directory: " + cfg.domain_b_dir.string());

    for (std::uint64_t seed : cfg.seeds) {
        PipelineContext ctx = make_context(cfg, seed);
        std::filesystem::create_directories(ctx.dir);
        save_manifest(ctx, load_manifest(ctx)); // drop the config echo early
        for (const StageDef& st : stages_for(cfg.method))
            run_stage_checked(ctx, st);
    }
    return cfg.out_dir;
}

} // namespace cgan
