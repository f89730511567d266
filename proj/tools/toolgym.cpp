// toolgym: operator entry point.
//
// Exit codes: 0 success, 1 operational failure, 2 usage error.
// Reports go to stdout as one JSON record per line (--human for a table).

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "toolgym/curriculum.hpp"
#include "toolgym/env.hpp"
#include "toolgym/mock_server.hpp"
#include "toolgym/policy.hpp"
#include "toolgym/reports.hpp"
#include "toolgym/rollout.hpp"
#include "toolgym/router.hpp"
#include "toolgym/store.hpp"

using namespace toolgym;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

// Thrown for bad flag combinations that CLI11 cannot express.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string cell(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::ostringstream os;
        os << std::setprecision(6) << v.get<double>();
        return os.str();
    }
    return v.dump();
}

void emit(const std::vector<json>& records, bool human) {
    if (!human) {
        for (const auto& r : records) std::cout << r.dump() << '\n';
        return;
    }
    // group consecutive records of one kind under a header row
    std::string last_kind;
    for (const auto& r : records) {
        std::string kind = r.value("record", "");
        if (kind != last_kind) {
            std::cout << '\n' << kind << '\n';
            for (const auto& [k, v] : r.items()) {
                if (k != "record") std::cout << std::left << std::setw(18) << k;
            }
            std::cout << '\n';
            last_kind = kind;
        }
        for (const auto& [k, v] : r.items()) {
            if (k != "record") std::cout << std::left << std::setw(18) << cell(v);
        }
        std::cout << '\n';
    }
}

std::vector<TrajectoryRecord> read_records(const std::string& path, std::size_t max_corrupt) {
    if (!std::filesystem::exists(path)) throw Error("log not found: " + path);
    auto contents = read_log(path);
    if (contents.corrupt_lines > max_corrupt) {
        throw Error("log " + path + " has " + std::to_string(contents.corrupt_lines) +
                    " corrupt lines (limit " + std::to_string(max_corrupt) + ")");
    }
    if (contents.corrupt_lines > 0) {
        std::cerr << "warning: skipped " << contents.corrupt_lines << " corrupt line(s)\n";
    }
    return std::move(contents.records);
}

bool is_url(const std::string& s) { return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0; }

struct Options {
    bool human = false;

    std::string registry;
    int port = 8765;
    std::int64_t latency_ms = 0;
    double fail_rate = 0.0;
    std::string script;
    std::uint64_t seed = 0;
    bool seed_set = false;

    std::string dataset;
    std::string policy;
    int group_size = 8;
    int concurrency = 24;
    int max_turns = 3;
    std::string out;
    std::string tool_endpoint;
    bool continue_on_tool_failure = false;
    std::int64_t deadline_ms = 30'000;

    std::string log;
    std::string variant = "paper";
    std::string convention = "signed";
    std::size_t max_corrupt = 1;

    double epsilon = 0.2;
    std::string tokens;
    int adv_group_size = 0;
    std::string normalizer = "masked";
    double kl_beta = 0.0;

    std::string rates;
    double lower = 0.125;
    double upper = 0.375;
};

int cmd_serve_mock(const Options& o) {
    auto registry = load_registry(o.registry);
    auto script = o.script.empty() ? default_mock_script(registry) : load_mock_script(o.script);
    MockServerConfig cfg;
    cfg.port = o.port;
    cfg.latency_ms = o.latency_ms;
    cfg.fail_rate = o.fail_rate;
    cfg.seed = o.seed;
    MockToolServer server(std::move(registry), std::move(script), cfg);
    server.start();
    std::cout << server.endpoint() << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop && server.running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    return kOk;
}

int cmd_run(const Options& o) {
    auto registry = load_registry(o.registry);
    if (!o.tool_endpoint.empty()) registry = registry.with_endpoint(o.tool_endpoint);
    auto dataset = load_dataset(o.dataset);

    std::unique_ptr<Policy> policy;
    if (is_url(o.policy)) {
        policy = std::make_unique<RemoteHttpPolicy>(o.policy);
    } else {
        policy = std::make_unique<ScriptedPolicy>(ScriptedPolicy::load(o.policy));
    }

    RouterConfig router_cfg;
    router_cfg.default_deadline_ms = o.deadline_ms;
    router_cfg.per_endpoint_concurrency = o.concurrency;
    HttpToolRouter router(std::move(registry), router_cfg);
    Environment env(router);

    RunConfig cfg;
    cfg.concurrency = o.concurrency;
    cfg.group_size = o.group_size;
    cfg.max_turns = o.max_turns;
    cfg.abort_on_env_error = !o.continue_on_tool_failure;
    if (o.seed_set) {
        for (int g = 0; g < o.group_size; ++g) cfg.seeds.push_back(o.seed + static_cast<std::uint64_t>(g));
    }

    TrajectoryLog log(o.out, true);
    auto summary = run_episodes(dataset, *policy, cfg, env, log);
    log.flush();

    auto records = summary.to_records();
    std::ofstream side(o.out + ".summary");
    for (const auto& r : records) side << r.dump() << '\n';
    emit(records, o.human);

    if (auto aborted = summary.count(EpisodeStatus::Aborted); aborted > 0) {
        std::cerr << "run: " << aborted << " episode(s) aborted\n";
        return kFailure;
    }
    return kOk;
}

int cmd_score(const Options& o) {
    auto variant = reward_variant_from_string(o.variant);
    if (!variant) throw UsageError("unknown variant: " + o.variant);
    auto convention = o.convention == "binary" ? IndicatorConvention::Binary : IndicatorConvention::Signed;
    auto records = read_records(o.log, o.max_corrupt);
    auto report = score_records(records, *variant, convention);
    emit(report.to_records(), o.human);
    return kOk;
}

int cmd_advantages(const Options& o) {
    auto records = read_records(o.log, o.max_corrupt);
    std::map<std::string, TokenBatch> batches;
    if (!o.tokens.empty()) batches = load_token_batches(o.tokens);
    ObjectiveOptions opts;
    opts.epsilon = o.epsilon;
    opts.kl_beta = o.kl_beta;
    opts.normalizer = o.normalizer == "all" ? LengthNormalizer::AllTokens : LengthNormalizer::MaskedTokens;
    auto report = advantage_report(records, o.adv_group_size, batches, opts);
    emit(report.to_records(), o.human);
    return kOk;
}

int cmd_curriculum(const Options& o) {
    if (!(0.0 <= o.lower && o.lower <= o.upper && o.upper <= 1.0)) {
        throw UsageError("curriculum: need 0 <= lower <= upper <= 1");
    }
    std::vector<PassRateRecord> rates;
    if (!o.rates.empty()) {
        rates = load_pass_rates(o.rates);
    } else {
        auto records = read_records(o.log, o.max_corrupt);
        rates = pass_rates(records);
    }
    auto slice = select_slice(rates, o.lower, o.upper);
    write_manifest(slice, o.out);
    emit({json{{"record", "curriculum"},
               {"instances", rates.size()},
               {"selected", slice.selected.size()},
               {"excluded_easy", slice.excluded_easy},
               {"excluded_hard", slice.excluded_hard},
               {"lower", slice.lower},
               {"upper", slice.upper}}},
         o.human);
    return kOk;
}

int cmd_taxonomy(const Options& o) {
    auto records = read_records(o.log, o.max_corrupt);
    std::optional<Registry> registry;
    if (!o.registry.empty()) registry = load_registry(o.registry);
    auto report = taxonomy_report(records, registry ? &*registry : nullptr);
    emit(report.to_records(), o.human);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"toolgym: multi-turn tool-use RL environment"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file with the same keys as the flags");
    app.add_flag("--human", o.human, "tabular output")->envname("TOOLGYM_HUMAN");

    auto* serve = app.add_subcommand("serve-mock", "serve scripted tool responses");
    serve->add_option("--registry", o.registry)->required()->check(CLI::ExistingFile)->envname("TOOLGYM_REGISTRY");
    serve->add_option("--port", o.port)->envname("TOOLGYM_PORT");
    serve->add_option("--latency-ms", o.latency_ms)->check(CLI::NonNegativeNumber)->envname("TOOLGYM_LATENCY_MS");
    serve->add_option("--fail-rate", o.fail_rate)->check(CLI::Range(0.0, 1.0))->envname("TOOLGYM_FAIL_RATE");
    serve->add_option("--script", o.script, "JSONL replies; default covers every tool")
        ->check(CLI::ExistingFile)
        ->envname("TOOLGYM_SCRIPT");
    serve->add_option("--seed", o.seed)->envname("TOOLGYM_SEED");

    auto* run = app.add_subcommand("run", "run G rollouts per instance and log them");
    run->add_option("--dataset", o.dataset)->required()->check(CLI::ExistingFile)->envname("TOOLGYM_DATASET");
    run->add_option("--registry", o.registry)->required()->check(CLI::ExistingFile)->envname("TOOLGYM_REGISTRY");
    run->add_option("--policy", o.policy, "scripted JSONL path or http(s) URL")
        ->required()
        ->envname("TOOLGYM_POLICY");
    run->add_option("--group-size", o.group_size)->check(CLI::PositiveNumber)->envname("TOOLGYM_GROUP_SIZE");
    run->add_option("--concurrency", o.concurrency)->check(CLI::PositiveNumber)->envname("TOOLGYM_CONCURRENCY");
    run->add_option("--max-turns", o.max_turns)->check(CLI::PositiveNumber)->envname("TOOLGYM_MAX_TURNS");
    run->add_option("--out", o.out)->required()->envname("TOOLGYM_OUT");
    run->add_option("--tool-endpoint", o.tool_endpoint, "send every tool to this endpoint")
        ->envname("TOOLGYM_TOOL_ENDPOINT");
    run->add_option("--deadline-ms", o.deadline_ms)->check(CLI::PositiveNumber)->envname("TOOLGYM_DEADLINE_MS");
    auto* seed_opt = run->add_option("--seed", o.seed)->envname("TOOLGYM_SEED");
    run->add_flag("--continue-on-tool-failure", o.continue_on_tool_failure,
                  "feed endpoint failures back to the policy instead of aborting")
        ->envname("TOOLGYM_CONTINUE_ON_TOOL_FAILURE");

    auto* score = app.add_subcommand("score", "recompute rewards over a log");
    score->add_option("--log", o.log)->required()->envname("TOOLGYM_LOG");
    score->add_option("--variant", o.variant)
        ->check(CLI::IsMember({"paper", "dense", "sparse", "difficulty"}))
        ->envname("TOOLGYM_VARIANT");
    score->add_option("--convention", o.convention, "indicator for dense/sparse: signed (+-1) or binary (0/1)")
        ->check(CLI::IsMember({"signed", "binary"}))
        ->envname("TOOLGYM_CONVENTION");

    auto* adv = app.add_subcommand("advantages", "group-normalized advantages");
    adv->add_option("--log", o.log)->required()->envname("TOOLGYM_LOG");
    adv->add_option("--epsilon", o.epsilon)->check(CLI::Range(0.0, 1.0))->envname("TOOLGYM_EPSILON");
    adv->add_option("--tokens", o.tokens, "JSONL token batches keyed by episode_id")
        ->check(CLI::ExistingFile)
        ->envname("TOOLGYM_TOKENS");
    adv->add_option("--group-size", o.adv_group_size, "0 uses every rollout of an instance")
        ->check(CLI::NonNegativeNumber)
        ->envname("TOOLGYM_GROUP_SIZE");
    adv->add_option("--normalizer", o.normalizer)->check(CLI::IsMember({"masked", "all"}))->envname("TOOLGYM_NORMALIZER");
    adv->add_option("--kl-beta", o.kl_beta)->check(CLI::NonNegativeNumber)->envname("TOOLGYM_KL_BETA");

    auto* cur = app.add_subcommand("curriculum", "select the tail-patch slice");
    auto* rates_opt = cur->add_option("--rates", o.rates)->check(CLI::ExistingFile)->envname("TOOLGYM_RATES");
    auto* log_opt = cur->add_option("--log", o.log)->envname("TOOLGYM_LOG");
    rates_opt->excludes(log_opt);
    cur->add_option("--lower", o.lower)->envname("TOOLGYM_LOWER");
    cur->add_option("--upper", o.upper)->envname("TOOLGYM_UPPER");
    cur->add_option("--out", o.out)->required()->envname("TOOLGYM_OUT");

    auto* tax = app.add_subcommand("taxonomy-report", "E1-E6 error table");
    tax->add_option("--log", o.log)->required()->envname("TOOLGYM_LOG");
    tax->add_option("--registry", o.registry, "re-validate calls against this registry")
        ->check(CLI::ExistingFile)
        ->envname("TOOLGYM_REGISTRY");

    for (auto* sub : {score, adv, cur, tax}) {
        sub->add_option("--max-corrupt", o.max_corrupt, "corrupt log lines tolerated")->envname("TOOLGYM_MAX_CORRUPT");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    o.seed_set = seed_opt->count() > 0;

    try {
        if (serve->parsed()) return cmd_serve_mock(o);
        if (run->parsed()) return cmd_run(o);
        if (score->parsed()) return cmd_score(o);
        if (adv->parsed()) return cmd_advantages(o);
        if (cur->parsed()) {
            if (o.rates.empty() && o.log.empty()) throw UsageError("curriculum: need --rates or --log");
            return cmd_curriculum(o);
        }
        if (tax->parsed()) return cmd_taxonomy(o);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}
