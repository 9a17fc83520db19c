#include "cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "lsp/attack.hpp"
#include "lsp/certify.hpp"
#include "lsp/data.hpp"
#include "lsp/errors.hpp"
#include "lsp/hash.hpp"
#include "lsp/model.hpp"
#include "lsp/rng.hpp"
#include "lsp/train.hpp"

namespace lsp::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }
}

// A manifest carries the resolved config under "config"; a plain config
// file is used as-is.
const json& effective_config(const json& j) {
    if (j.contains("command") && j.contains("config")) return j.at("config");
    return j;
}

// Pre-scan for --config so JSON values land before flag overrides.
std::optional<fs::path> find_config_arg(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw ConfigError("--config expects a path");
            return fs::path(args[i + 1]);
        }
        if (args[i].rfind("--config=", 0) == 0) return fs::path(args[i].substr(9));
    }
    return std::nullopt;
}

int parse_app(CLI::App& app, const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("lsp");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(std::string("argument error: ") + e.what());
    }
    return -1;  // parsed, keep going
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

// ---------------------------------------------------------------------
// Train-family configuration
// ---------------------------------------------------------------------

struct TrainCmdOpts {
    std::string data;
    std::string out;
    std::string extractor = "identity";
    std::vector<std::size_t> dims;  // empty -> derived from the dataset
    std::string kind = "l2";
    std::string structure = "local";
    std::string attack_norm = "linf";
    std::string attack_loss = "ce";
    std::string lr_drops = "75:10,90:10";
    TrainConfig cfg;
};

std::map<int, double> parse_lr_drops(const std::string& s) {
    std::map<int, double> drops;
    if (s.empty()) return drops;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        require(colon != std::string::npos, "lr drop '" + item + "' is not epoch:divisor");
        try {
            drops[std::stoi(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("lr drop '" + item + "' is not epoch:divisor");
        }
    }
    return drops;
}

std::string lr_drops_string(const std::map<int, double>& drops) {
    std::string out;
    for (const auto& [e, d] : drops) {
        if (!out.empty()) out += ',';
        out += std::to_string(e) + ':' + fmt17(d);
    }
    return out;
}

void apply_attack_json(const json& a, AttackConfig& cfg, std::string& norm_s,
                       std::string& loss_s) {
    for (const auto& [key, val] : a.items()) {
        if (key == "method")
            cfg.method = attack_method_from_string(val.get<std::string>());
        else if (key == "norm")
            norm_s = val.get<std::string>();
        else if (key == "epsilon")
            cfg.epsilon = val.get<double>();
        else if (key == "steps")
            cfg.steps = val.get<int>();
        else if (key == "step_size")
            cfg.step_size = val.get<double>();
        else if (key == "loss")
            loss_s = val.get<std::string>();
        else if (key == "random_init")
            cfg.random_init = val.get<bool>();
        else if (key == "data_min")
            cfg.data_min = val.get<double>();
        else if (key == "data_max")
            cfg.data_max = val.get<double>();
        else
            throw ConfigError("unknown attack config key '" + key + "'");
    }
}

void apply_train_json(const json& raw, TrainCmdOpts& o, const std::string& command) {
    const json& c = effective_config(raw);
    for (const auto& [key, val] : c.items()) {
        if (key == "data")
            o.data = val.get<std::string>();
        else if (key == "out")
            o.out = val.get<std::string>();
        else if (key == "extractor")
            o.extractor = val.get<std::string>();
        else if (key == "dims")
            o.dims = val.get<std::vector<std::size_t>>();
        else if (key == "epochs")
            o.cfg.epochs = val.get<int>();
        else if (key == "batch_size")
            o.cfg.batch_size = val.get<std::size_t>();
        else if (key == "lr")
            o.cfg.lr.initial = val.get<double>();
        else if (key == "lr_drops") {
            o.cfg.lr.drops.clear();
            for (const auto& [e, d] : val.items())
                o.cfg.lr.drops[std::stoi(e)] = d.get<double>();
            o.lr_drops = lr_drops_string(o.cfg.lr.drops);
        } else if (key == "momentum")
            o.cfg.momentum = val.get<double>();
        else if (key == "lambda")
            o.cfg.lambda = val.get<double>();
        else if (key == "m")
            o.cfg.m = val.get<std::size_t>();
        else if (key == "kind")
            o.kind = val.get<std::string>();
        else if (key == "structure")
            o.structure = val.get<std::string>();
        else if (key == "adversarial") {
            const bool adv = val.get<bool>();
            if (command == "train" && adv)
                throw ConfigError("config sets adversarial=true; use the train-adv command");
            if (command == "train-adv" && !adv)
                throw ConfigError("config sets adversarial=false; use the train command");
        } else if (key == "bank_momentum")
            o.cfg.bank_momentum = val.get<double>();
        else if (key == "mixup_alpha")
            o.cfg.mixup_alpha = val.get<double>();
        else if (key == "val_fraction")
            o.cfg.val_fraction = val.get<double>();
        else if (key == "early_stopping")
            o.cfg.early_stopping = val.get<bool>();
        else if (key == "pretext_tau")
            o.cfg.pretext_tau = val.get<double>();
        else if (key == "seed")
            o.cfg.seed = val.get<std::uint64_t>();
        else if (key == "attack")
            apply_attack_json(val, o.cfg.attack, o.attack_norm, o.attack_loss);
        else
            throw ConfigError("unknown config key '" + key + "'");
    }
}

json attack_to_json(const AttackConfig& a) {
    return json{{"method", to_string(a.method)},
                {"norm", to_string(a.norm)},
                {"epsilon", a.epsilon},
                {"steps", a.steps},
                {"step_size", a.step_size},
                {"loss", to_string(a.loss)},
                {"random_init", a.random_init},
                {"data_min", a.data_min},
                {"data_max", a.data_max}};
}

json train_to_json(const TrainCmdOpts& o, bool adversarial) {
    json drops = json::object();
    for (const auto& [e, d] : o.cfg.lr.drops) drops[std::to_string(e)] = d;
    return json{{"data", o.data},
                {"out", o.out},
                {"extractor", o.extractor},
                {"dims", o.dims},
                {"epochs", o.cfg.epochs},
                {"batch_size", o.cfg.batch_size},
                {"lr", o.cfg.lr.initial},
                {"lr_drops", drops},
                {"momentum", o.cfg.momentum},
                {"lambda", o.cfg.lambda},
                {"m", o.cfg.m},
                {"kind", to_string(o.cfg.kind)},
                {"structure", to_string(o.cfg.structure)},
                {"adversarial", adversarial},
                {"bank_momentum", o.cfg.bank_momentum},
                {"mixup_alpha", o.cfg.mixup_alpha},
                {"val_fraction", o.cfg.val_fraction},
                {"early_stopping", o.cfg.early_stopping},
                {"pretext_tau", o.cfg.pretext_tau},
                {"seed", o.cfg.seed},
                {"attack", attack_to_json(o.cfg.attack)}};
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const fs::path& data_path, std::uint64_t fingerprint,
                    const std::string& started, const std::vector<std::string>& outputs) {
    json m{{"tool", "lsp"},
           {"version", kToolVersion},
           {"command", command},
           {"seed", config.contains("seed") ? config.at("seed") : json(0)},
           {"config", config},
           {"dataset", json{{"path", data_path.string()},
                            {"fingerprint", "fnv1a:" + hash_hex(fingerprint)}}},
           {"started", started},
           {"finished", now_iso8601()},
           {"outputs", outputs}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw FormatError("cannot write manifest in " + dir.string());
    out << m.dump(2) << "\n";
}

void add_train_flags(CLI::App& app, TrainCmdOpts& o, bool with_structure) {
    app.add_option("--data", o.data, "training dataset CSV");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--dims", o.dims, "layer dims, e.g. 2,32,32,2")->delimiter(',');
    app.add_option("--epochs", o.cfg.epochs);
    app.add_option("--batch-size", o.cfg.batch_size);
    app.add_option("--lr", o.cfg.lr.initial);
    app.add_option("--lr-drops", o.lr_drops, "epoch:divisor list, e.g. 75:10,90:10");
    app.add_option("--momentum", o.cfg.momentum);
    app.add_option("--val-fraction", o.cfg.val_fraction);
    app.add_flag("--early-stopping,!--no-early-stopping", o.cfg.early_stopping);
    app.add_option("--seed", o.cfg.seed);
    app.add_option("--config", "JSON config or manifest (flags override it)")
        ->expected(1);  // consumed by the pre-scan
    if (with_structure) {
        app.add_option("--lambda", o.cfg.lambda);
        app.add_option("--m", o.cfg.m);
        app.add_option("--kind", o.kind, "lsp discrepancy: kl|cosine|l1|l2");
        app.add_option("--structure", o.structure, "local|global|off");
        app.add_option("--bank-momentum", o.cfg.bank_momentum);
    }
}

void add_attack_flags(CLI::App& app, TrainCmdOpts& o) {
    app.add_option("--epsilon", o.cfg.attack.epsilon);
    app.add_option("--steps", o.cfg.attack.steps);
    app.add_option("--step-size", o.cfg.attack.step_size);
    app.add_option("--norm", o.attack_norm, "linf|l2");
    app.add_flag("--random-init,!--no-random-init", o.cfg.attack.random_init);
}

void finalize_train_opts(TrainCmdOpts& o) {
    o.cfg.kind = lsp_kind_from_string(o.kind);
    o.cfg.structure = structure_mode_from_string(o.structure);
    o.cfg.attack.norm = attack_norm_from_string(o.attack_norm);
    o.cfg.attack.loss = attack_loss_from_string(o.attack_loss);
    o.cfg.lr.drops = parse_lr_drops(o.lr_drops);
}

Dataset load_dataset_checked(const std::string& path) {
    require(!path.empty(), "missing dataset path (--data)");
    const Dataset d = load_csv(path);
    d.validate();
    return d;
}

Extractor load_extractor(const std::string& spec) {
    if (spec.empty() || spec == "identity") return std::nullopt;
    return MlpModel::load(spec);
}

int run_train_family(const std::string& command, const std::vector<std::string>& args) {
    TrainCmdOpts o;
    const bool adversarial = command == "train-adv";
    const bool pretext = command == "pretext";
    if (adversarial) o.cfg.early_stopping = true;  // best-robust checkpoint selection

    if (const auto cfg_path = find_config_arg(args))
        apply_train_json(load_json_file(*cfg_path), o, command);

    CLI::App app{"lsp " + command};
    add_train_flags(app, o, !pretext);
    if (!pretext) add_attack_flags(app, o);
    if (pretext) app.add_option("--tau", o.cfg.pretext_tau, "softmax temperature");
    if (!pretext && !adversarial)
        app.add_option("--extractor", o.extractor, "encoder checkpoint or 'identity'");
    app.add_option("--mixup-alpha", o.cfg.mixup_alpha);
    if (const int rc = parse_app(app, args); rc >= 0) return rc;

    finalize_train_opts(o);
    require(!o.out.empty(), "missing output directory (--out)");
    const Dataset data = load_dataset_checked(o.data);
    if (o.dims.empty()) {
        if (pretext)
            o.dims = {data.dim(), 32, 16};
        else
            o.dims = {data.dim(), 32, 32, data.num_classes};
    }
    require(o.dims.size() >= 2, "need at least input and output dims");
    require(o.dims.front() == data.dim(), "dims[0] must equal the feature dimension");
    if (!pretext)
        require(o.dims.back() == data.num_classes,
                "dims must end with the number of classes");
    o.cfg.adversarial = adversarial;
    o.cfg.attack.data_min = data.feature_min;
    o.cfg.attack.data_max = data.feature_max;
    o.cfg.validate();

    fs::create_directories(o.out);
    const std::string started = now_iso8601();
    const MlpModel init = MlpModel::init(o.dims, rng::derive(o.cfg.seed, rng::kInit));

    MlpModel final_model;
    TrainLog log;
    std::vector<std::string> outputs{"model.bin", "trainlog.csv"};
    if (pretext) {
        auto [model, l] = train_pretext(init, data, o.cfg);
        final_model = std::move(model);
        log = std::move(l);
    } else if (adversarial) {
        TrainResult res = train_adversarial(init, data, o.cfg);
        final_model = std::move(res.model);
        log = std::move(res.log);
        res.nat_bank->save(fs::path(o.out) / "bank_nat.bin");
        res.adv_bank->save(fs::path(o.out) / "bank_adv.bin");
        outputs.push_back("bank_nat.bin");
        outputs.push_back("bank_adv.bin");
    } else {
        const Extractor g = load_extractor(o.extractor);
        TrainResult res = train_standard(init, g, data, o.cfg);
        final_model = std::move(res.model);
        log = std::move(res.log);
    }

    final_model.save(fs::path(o.out) / "model.bin");
    log.to_csv(fs::path(o.out) / "trainlog.csv");
    write_manifest(o.out, command, train_to_json(o, adversarial), o.data,
                   dataset_fingerprint(data), started, outputs);

    const EpochRecord& last = log.epochs.back();
    std::cout << command << ": " << o.out << "  epochs=" << o.cfg.epochs
              << " final ce=" << last.ce << " lsp=" << last.lsp
              << " clean=" << last.clean_acc << " robust=" << last.robust_acc
              << " purity=" << last.purity << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------

RowMatrix parse_centers(const std::string& s) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(s);
    std::string group;
    while (std::getline(ss, group, ';')) {
        std::vector<double> row;
        std::stringstream gs(group);
        std::string cell;
        while (std::getline(gs, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("bad center coordinate '" + cell + "'");
            }
        }
        require(!row.empty(), "empty center in --centers");
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), "--centers is empty");
    RowMatrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == rows[0].size(), "centers have mixed dimensions");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

int cmd_gen(const std::vector<std::string>& args) {
    std::string kind = "moons", out, centers = "0.2,0.2;0.8,0.8";
    std::size_t n = 500;
    double noise = 0.1, sigma = 0.05;
    std::uint64_t seed = 0;

    if (const auto cfg_path = find_config_arg(args)) {
        const json& c = effective_config(load_json_file(*cfg_path));
        for (const auto& [key, val] : c.items()) {
            if (key == "kind") kind = val.get<std::string>();
            else if (key == "n") n = val.get<std::size_t>();
            else if (key == "noise") noise = val.get<double>();
            else if (key == "sigma") sigma = val.get<double>();
            else if (key == "centers") centers = val.get<std::string>();
            else if (key == "seed") seed = val.get<std::uint64_t>();
            else if (key == "out") out = val.get<std::string>();
            else throw ConfigError("unknown config key '" + key + "'");
        }
    }

    CLI::App app{"lsp gen"};
    app.add_option("--kind", kind, "moons|blobs");
    app.add_option("--n", n);
    app.add_option("--noise", noise, "two-moons noise sigma");
    app.add_option("--sigma", sigma, "blob cluster sigma");
    app.add_option("--centers", centers, "blob centers, e.g. 0.2,0.2;0.8,0.8");
    app.add_option("--seed", seed);
    app.add_option("--out", out, "output CSV path");
    app.add_option("--config", "JSON config")->expected(1);
    if (const int rc = parse_app(app, args); rc >= 0) return rc;

    require(!out.empty(), "missing output path (--out)");
    Dataset d;
    if (kind == "moons")
        d = gen_two_moons(n, noise, seed);
    else if (kind == "blobs")
        d = gen_gaussian_blobs(n, parse_centers(centers), sigma, seed);
    else
        throw ConfigError("unknown dataset kind '" + kind + "'");

    const std::string started = now_iso8601();
    if (const fs::path parent = fs::path(out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    save_csv(d, out);

    json cfg{{"kind", kind}, {"n", n},       {"seed", seed},
             {"noise", noise}, {"sigma", sigma}, {"centers", centers},
             {"out", out}};
    json m{{"tool", "lsp"},
           {"version", kToolVersion},
           {"command", "gen"},
           {"seed", seed},
           {"config", cfg},
           {"dataset", json{{"path", out},
                            {"fingerprint", "fnv1a:" + hash_hex(dataset_fingerprint(d))}}},
           {"started", started},
           {"finished", now_iso8601()},
           {"outputs", json::array({fs::path(out).filename().string()})}};
    std::ofstream mf(out + ".manifest.json");
    if (!mf) throw FormatError("cannot write manifest for " + out);
    mf << m.dump(2) << "\n";

    std::cout << "gen: wrote " << d.size() << " samples (" << kind << ") to " << out << "\n";
    return 0;
}

// ---------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------

struct AttackCmdOpts {
    std::string model, data, out;
    std::string attack = "pgd", norm = "linf";
    AttackConfig cfg;
};

int cmd_attack(const std::vector<std::string>& args) {
    AttackCmdOpts o;
    o.cfg.random_init = true;

    if (const auto cfg_path = find_config_arg(args)) {
        const json& c = effective_config(load_json_file(*cfg_path));
        for (const auto& [key, val] : c.items()) {
            if (key == "model") o.model = val.get<std::string>();
            else if (key == "data") o.data = val.get<std::string>();
            else if (key == "out") o.out = val.get<std::string>();
            else if (key == "attack") o.attack = val.get<std::string>();
            else if (key == "norm") o.norm = val.get<std::string>();
            else if (key == "epsilon") o.cfg.epsilon = val.get<double>();
            else if (key == "steps") o.cfg.steps = val.get<int>();
            else if (key == "step_size") o.cfg.step_size = val.get<double>();
            else if (key == "random_init") o.cfg.random_init = val.get<bool>();
            else if (key == "seed") o.cfg.seed = val.get<std::uint64_t>();
            else throw ConfigError("unknown config key '" + key + "'");
        }
    }

    CLI::App app{"lsp attack"};
    app.add_option("--model", o.model, "model checkpoint");
    app.add_option("--data", o.data, "evaluation dataset CSV");
    app.add_option("--out", o.out, "run directory (defaults to the model's directory)");
    app.add_option("--attack", o.attack, "fgsm|pgd|cw");
    app.add_option("--norm", o.norm, "linf|l2");
    app.add_option("--epsilon", o.cfg.epsilon);
    app.add_option("--steps", o.cfg.steps);
    app.add_option("--step-size", o.cfg.step_size);
    app.add_flag("--random-init,!--no-random-init", o.cfg.random_init);
    app.add_option("--seed", o.cfg.seed);
    app.add_option("--config", "JSON config")->expected(1);
    if (const int rc = parse_app(app, args); rc >= 0) return rc;

    require(!o.model.empty(), "missing model checkpoint (--model)");
    require(!o.data.empty(), "missing dataset path (--data)");
    if (o.attack == "fgsm") {
        o.cfg.method = AttackMethod::fgsm;
        o.cfg.loss = AttackLoss::ce;
    } else if (o.attack == "pgd") {
        o.cfg.method = AttackMethod::pgd;
        o.cfg.loss = AttackLoss::ce;
    } else if (o.attack == "cw") {
        o.cfg.method = AttackMethod::pgd;
        o.cfg.loss = AttackLoss::cw_margin;
    } else {
        throw ConfigError("unknown attack '" + o.attack + "' (expected fgsm|pgd|cw)");
    }
    o.cfg.norm = attack_norm_from_string(o.norm);

    const MlpModel model = MlpModel::load(o.model);
    const Dataset data = load_dataset_checked(o.data);
    o.cfg.data_min = data.feature_min;
    o.cfg.data_max = data.feature_max;
    o.cfg.validate();

    const std::string started = now_iso8601();
    const RobustAccuracy acc = evaluate_robust_accuracy(model, data, o.cfg);

    const fs::path out_dir =
        o.out.empty() ? fs::path(o.model).parent_path() : fs::path(o.out);
    fs::create_directories(out_dir);
    const fs::path csv = out_dir / "attacks.csv";
    const bool fresh = !fs::exists(csv);
    std::ofstream rows(csv, std::ios::app);
    if (!rows) throw FormatError("cannot open " + csv.string());
    if (fresh)
        rows << "attack,norm,epsilon,steps,step_size,random_init,loss,seed,clean_acc,"
                "robust_acc,model,dataset,dataset_fingerprint\n";
    rows << o.attack << ',' << to_string(o.cfg.norm) << ',' << fmt17(o.cfg.epsilon) << ','
         << o.cfg.steps << ',' << fmt17(o.cfg.step_size) << ','
         << (o.cfg.random_init ? 1 : 0) << ',' << to_string(o.cfg.loss) << ',' << o.cfg.seed
         << ',' << fmt17(acc.clean) << ',' << fmt17(acc.robust) << ',' << o.model << ','
         << o.data << ',' << "fnv1a:" << hash_hex(dataset_fingerprint(data)) << "\n";
    rows.close();

    // One manifest governs attacks.csv; each invocation appends an entry.
    const fs::path mpath = out_dir / "attacks.manifest.json";
    json m;
    if (fs::exists(mpath)) m = load_json_file(mpath);
    if (!m.contains("invocations")) {
        m = json{{"tool", "lsp"},     {"version", kToolVersion},
                 {"command", "attack"}, {"outputs", json::array({"attacks.csv"})},
                 {"invocations", json::array()}};
    }
    m["invocations"].push_back(json{
        {"attack", o.attack},
        {"norm", to_string(o.cfg.norm)},
        {"epsilon", o.cfg.epsilon},
        {"steps", o.cfg.steps},
        {"step_size", o.cfg.step_size},
        {"random_init", o.cfg.random_init},
        {"seed", o.cfg.seed},
        {"model", o.model},
        {"dataset", json{{"path", o.data},
                         {"fingerprint", "fnv1a:" + hash_hex(dataset_fingerprint(data))}}},
        {"started", started},
        {"finished", now_iso8601()}});
    std::ofstream mf(mpath);
    mf << m.dump(2) << "\n";

    std::printf("attack %s (%s, eps=%g): clean=%.4f robust=%.4f\n", o.attack.c_str(),
                to_string(o.cfg.norm).c_str(), o.cfg.epsilon, acc.clean, acc.robust);
    return 0;
}

// ---------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------

int cmd_certify(const std::vector<std::string>& args) {
    std::string model_path, data_path, out, mode = "analytic";
    CertifyOptions opts;

    if (const auto cfg_path = find_config_arg(args)) {
        const json& c = effective_config(load_json_file(*cfg_path));
        for (const auto& [key, val] : c.items()) {
            if (key == "model") model_path = val.get<std::string>();
            else if (key == "data") data_path = val.get<std::string>();
            else if (key == "out") out = val.get<std::string>();
            else if (key == "mode") mode = val.get<std::string>();
            else if (key == "radius_probes") opts.radius_probes = val.get<int>();
            else if (key == "lipschitz_probes") opts.lipschitz_probes = val.get<int>();
            else if (key == "lipschitz_radius") opts.lipschitz_radius = val.get<double>();
            else if (key == "seed") opts.seed = val.get<std::uint64_t>();
            else throw ConfigError("unknown config key '" + key + "'");
        }
    }

    CLI::App app{"lsp certify"};
    app.add_option("--model", model_path, "model checkpoint");
    app.add_option("--data", data_path, "dataset CSV");
    app.add_option("--out", out, "output CSV (default <model dir>/certify.csv)");
    app.add_option("--mode", mode, "empirical|analytic");
    app.add_option("--radius-probes", opts.radius_probes, "falsification probes per sample");
    app.add_option("--lipschitz-probes", opts.lipschitz_probes);
    app.add_option("--lipschitz-radius", opts.lipschitz_radius);
    app.add_option("--seed", opts.seed);
    app.add_option("--config", "JSON config")->expected(1);
    if (const int rc = parse_app(app, args); rc >= 0) return rc;

    require(!model_path.empty(), "missing model checkpoint (--model)");
    require(!data_path.empty(), "missing dataset path (--data)");
    opts.mode = lipschitz_mode_from_string(mode);
    require(opts.radius_probes >= 1, "--radius-probes must be positive");
    require(opts.lipschitz_probes >= 1, "--lipschitz-probes must be positive");
    require(opts.lipschitz_radius > 0, "--lipschitz-radius must be positive");

    const MlpModel model = MlpModel::load(model_path);
    const Dataset data = load_dataset_checked(data_path);
    const std::string started = now_iso8601();
    const auto reports = certify_dataset(model, data, opts);

    const fs::path out_csv = out.empty()
                                 ? fs::path(model_path).parent_path() / "certify.csv"
                                 : fs::path(out);
    if (const fs::path parent = out_csv.parent_path(); !parent.empty())
        fs::create_directories(parent);
    std::ofstream os(out_csv);
    if (!os) throw FormatError("cannot open " + out_csv.string());
    os << "sample_id,p_a,p_b,lipschitz,certified_radius,falsified,falsification_budget,"
          "mode,norm\n";
    double mean_r = 0;
    std::vector<double> radii;
    std::size_t falsified = 0;
    for (const auto& r : reports) {
        os << r.sample_id << ',' << fmt17(r.p_a) << ',' << fmt17(r.p_b) << ','
           << fmt17(r.lipschitz) << ',' << fmt17(r.certified_radius) << ','
           << (r.falsified ? 1 : 0) << ',' << r.falsification_budget << ',' << mode
           << ",l2\n";
        mean_r += r.certified_radius;
        radii.push_back(r.certified_radius);
        falsified += r.falsified ? 1 : 0;
    }
    os.close();
    mean_r /= static_cast<double>(reports.size());
    std::nth_element(radii.begin(), radii.begin() + radii.size() / 2, radii.end());
    const double median_r = radii[radii.size() / 2];

    const fs::path mpath = out_csv.parent_path() / (out_csv.stem().string() +
                                                    ".manifest.json");
    json m{{"tool", "lsp"},
           {"version", kToolVersion},
           {"command", "certify"},
           {"seed", opts.seed},
           {"config", json{{"model", model_path},
                           {"data", data_path},
                           {"out", out_csv.string()},
                           {"mode", mode},
                           {"radius_probes", opts.radius_probes},
                           {"lipschitz_probes", opts.lipschitz_probes},
                           {"lipschitz_radius", opts.lipschitz_radius},
                           {"seed", opts.seed}}},
           {"dataset", json{{"path", data_path},
                            {"fingerprint", "fnv1a:" + hash_hex(dataset_fingerprint(data))}}},
           {"started", started},
           {"finished", now_iso8601()},
           {"outputs", json::array({out_csv.filename().string()})}};
    std::ofstream mf(mpath);
    mf << m.dump(2) << "\n";

    std::printf("certify (%s, L2): n=%zu mean_radius=%.6f median_radius=%.6f falsified=%zu\n",
                mode.c_str(), reports.size(), mean_r, median_r, falsified);
    if (opts.mode == LipschitzMode::empirical)
        std::printf("note: empirical mode lower-bounds L_x; radii are heuristic\n");
    return 0;
}

// ---------------------------------------------------------------------
// report
// ---------------------------------------------------------------------

struct AttackRow {
    double clean = -1, robust = -1;
};

int cmd_report(const std::vector<std::string>& args) {
    std::vector<std::string> run_dirs;
    std::string out = "report.md";

    CLI::App app{"lsp report"};
    app.add_option("runs", run_dirs, "run directories")->expected(-1);
    app.add_option("--out", out, "markdown output path");
    if (const int rc = parse_app(app, args); rc >= 0) return rc;
    require(!run_dirs.empty(), "report needs at least one run directory");

    std::ostringstream table;
    table << "| run | clean | fgsm | pgd | cw | cert_radius_mean | cert_radius_median | "
             "cert_falsified |\n";
    table << "|---|---|---|---|---|---|---|---|\n";

    for (const std::string& dir : run_dirs) {
        const fs::path rd(dir);
        if (!fs::exists(rd / "trainlog.csv"))
            throw FormatError("run " + dir + ": missing trainlog.csv");
        if (!fs::exists(rd / "manifest.json"))
            throw FormatError("run " + dir + ": trainlog.csv has no manifest (orphaned run)");
        const TrainLog log = TrainLog::from_csv(rd / "trainlog.csv");
        if (log.epochs.empty()) throw FormatError("run " + dir + ": empty training log");

        // curves.csv mirrors the raw per-epoch series for plotting.
        log.to_csv(rd / "curves.csv");

        std::map<std::string, AttackRow> rows;
        double clean = log.epochs.back().clean_acc;
        if (fs::exists(rd / "attacks.csv")) {
            if (!fs::exists(rd / "attacks.manifest.json"))
                throw FormatError("run " + dir + ": attacks.csv has no manifest");
            std::ifstream in(rd / "attacks.csv");
            std::string line;
            std::getline(in, line);  // header
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::stringstream ss(line);
                std::vector<std::string> cells;
                std::string cell;
                while (std::getline(ss, cell, ',')) cells.push_back(cell);
                if (cells.size() < 10) throw FormatError("run " + dir + ": bad attack row");
                AttackRow row;
                row.clean = std::strtod(cells[8].c_str(), nullptr);
                row.robust = std::strtod(cells[9].c_str(), nullptr);
                rows[cells[0]] = row;  // newest row per attack wins
                clean = row.clean;
            }
        }

        std::string cert_mean = "-", cert_median = "-", cert_fals = "-";
        if (fs::exists(rd / "certify.csv")) {
            std::ifstream in(rd / "certify.csv");
            std::string line;
            std::getline(in, line);
            std::vector<double> radii;
            std::size_t fals = 0;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::stringstream ss(line);
                std::vector<std::string> cells;
                std::string cell;
                while (std::getline(ss, cell, ',')) cells.push_back(cell);
                if (cells.size() < 7) throw FormatError("run " + dir + ": bad certify row");
                radii.push_back(std::strtod(cells[4].c_str(), nullptr));
                fals += cells[5] == "1";
            }
            if (!radii.empty()) {
                double mean = 0;
                for (double r : radii) mean += r;
                mean /= static_cast<double>(radii.size());
                std::nth_element(radii.begin(), radii.begin() + radii.size() / 2,
                                 radii.end());
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.6f", mean);
                cert_mean = buf;
                std::snprintf(buf, sizeof buf, "%.6f", radii[radii.size() / 2]);
                cert_median = buf;
                cert_fals = std::to_string(fals);
            }
        }

        auto cellv = [&](const char* name) -> std::string {
            auto it = rows.find(name);
            if (it == rows.end()) return "-";
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.4f", it->second.robust);
            return buf;
        };
        char cbuf[32];
        std::snprintf(cbuf, sizeof cbuf, "%.4f", clean);
        table << "| " << rd.filename().string() << " | " << cbuf << " | " << cellv("fgsm")
              << " | " << cellv("pgd") << " | " << cellv("cw") << " | " << cert_mean
              << " | " << cert_median << " | " << cert_fals << " |\n";
    }

    if (const fs::path parent = fs::path(out).parent_path(); !parent.empty())
        fs::create_directories(parent);
    std::ofstream os(out);
    if (!os) throw FormatError("cannot open " + out);
    os << "# robustness report\n\ngenerated " << now_iso8601() << "\n\n" << table.str();
    std::cout << table.str();
    return 0;
}

const char* kUsage =
    "usage: lsp <command> [flags]\n"
    "\n"
    "commands:\n"
    "  gen        generate a synthetic dataset CSV (moons, blobs)\n"
    "  pretext    train an instance-discrimination feature extractor\n"
    "  train      standard training with the structure-preserving penalty\n"
    "  train-adv  PGD adversarial training with memory banks\n"
    "  attack     evaluate clean/robust accuracy of a checkpoint\n"
    "  certify    Lipschitz-based certified radii plus falsification probes\n"
    "  report     merge run directories into a markdown comparison table\n"
    "\n"
    "shared flags: --config <json>, --seed <n>, --out <path>\n";

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
            std::cout << kUsage;
            return args.empty() ? 2 : 0;
        }
        if (args[0] == "--version") {
            std::cout << "lsp " << kToolVersion << "\n";
            return 0;
        }
        const std::string cmd = args[0];
        const std::vector<std::string> rest(args.begin() + 1, args.end());
        if (cmd == "gen") return cmd_gen(rest);
        if (cmd == "train" || cmd == "train-adv" || cmd == "pretext")
            return run_train_family(cmd, rest);
        if (cmd == "attack") return cmd_attack(rest);
        if (cmd == "certify") return cmd_certify(rest);
        if (cmd == "report") return cmd_report(rest);
        throw ConfigError("unknown command '" + cmd + "'");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const ShapeError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const DegenerateNeighborhoodError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace lsp::cli
