// Acceptance suite: one check per release criterion, one PASS/FAIL line
// each, nonzero exit when anything fails. Tolerances are pinned here, not
// configurable.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "mrscore/corpus.hpp"
#include "mrscore/llmgen.hpp"
#include "mrscore/nlgmetrics.hpp"
#include "mrscore/reward.hpp"
#include "mrscore/rng.hpp"
#include "mrscore/rubric.hpp"
#include "mrscore/stats.hpp"
#include "support/oracles.hpp"
#include "support/textgen.hpp"

using namespace mrscore;

namespace {

struct AcceptanceCheck {
    int number;
    std::string name;
    std::function<bool(std::string&)> run;
};

double elapsed_sec(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// 1. rubric exactness
// ---------------------------------------------------------------------------

bool check_rubric_exactness(std::string& detail) {
    auto start = std::chrono::steady_clock::now();
    RubricWeights w = default_weights();
    int checked = 0;
    for (int mask = 0; mask < 128; ++mask) {
        ErrorVector e;
        std::array<int, 7> raw{};
        for (int i = 0; i < 7; ++i) {
            e[static_cast<std::size_t>(i)] = (mask >> i) & 1;
            raw[static_cast<std::size_t>(i)] = (mask >> i) & 1;
        }
        int got = total_score(e, w);
        int expected = oracles::rubric_total(raw, {30, 20, 20, 10, 10, 5, 5});
        if (got != expected || got < 0 || got > 100) {
            detail = "mask " + std::to_string(mask) + ": got " + std::to_string(got) +
                     ", oracle " + std::to_string(expected);
            return false;
        }
        ++checked;
    }
    double sec = elapsed_sec(start);
    std::ostringstream os;
    os << checked << "/128 exact, " << sec * 1000.0 << " ms";
    detail = os.str();
    return checked == 128 && sec < 1.0;
}

// ---------------------------------------------------------------------------
// 2. loss and gradient fidelity
// ---------------------------------------------------------------------------

std::string random_text(Rng& rng, std::size_t len) {
    const char* vocab[] = {"heart", "lung",  "clear",   "normal", "effusion", "impression",
                           "mild",  "right", "left",    "there",  "is",       "no",
                           "acute", "seen",  "process", "stable", "chest",    "within"};
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        out += vocab[rng.next_below(18)];
        out += ' ';
    }
    return out;
}

bool check_gradient_fidelity(std::string& detail) {
    const double kLn2 = 0.6931471805599453;
    if (std::fabs(pair_loss(0.5, 0.3, 0.2) - kLn2) > 1e-12) {
        detail = "pair_loss at zero argument missed ln 2";
        return false;
    }

    Rng rng(424242);
    FeatureConfig fc;
    fc.dim = 64;
    const double h = 1e-6;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        RewardModel model = zero_model(fc);
        for (auto& wv : model.weights) wv = rng.next_gaussian() * 0.5;
        model.bias = rng.next_gaussian() * 0.5;

        std::vector<ReportPair> pairs;
        std::size_t batch = 2 + rng.next_below(6);
        for (std::size_t i = 0; i < batch; ++i) {
            ReportPair p;
            p.ground_truth = random_text(rng, 6 + rng.next_below(8));
            p.accepted = random_text(rng, 4 + rng.next_below(8));
            p.rejected = random_text(rng, 4 + rng.next_below(8));
            int rej = static_cast<int>(rng.next_below(60));
            int acc = rej + 1 + static_cast<int>(rng.next_below(40));
            p.accepted_score = acc;
            p.rejected_score = rej;
            p.margin = (acc - rej) / 100.0;
            pairs.push_back(p);
        }
        double l2 = trial % 3 == 0 ? 1e-3 : 0.0;
        auto fp = featurize_pairs(pairs, fc);

        Gradient g = gradient_featurized(model, fp, l2);
        double scale = std::fabs(g.bias);
        std::vector<double> fd(model.weights.size());
        for (std::size_t i = 0; i < model.weights.size(); ++i) {
            RewardModel up = model, down = model;
            up.weights[i] += h;
            down.weights[i] -= h;
            fd[i] = (batch_loss_featurized(up, fp, l2) - batch_loss_featurized(down, fp, l2)) /
                    (2.0 * h);
            scale = std::max(scale, std::fabs(fd[i]));
        }
        RewardModel up = model, down = model;
        up.bias += h;
        down.bias -= h;
        double fd_bias =
            (batch_loss_featurized(up, fp, l2) - batch_loss_featurized(down, fp, l2)) / (2.0 * h);

        double denom = std::max(scale, 1e-8);
        worst = std::max(worst, std::fabs(g.bias - fd_bias) / denom);
        for (std::size_t i = 0; i < model.weights.size(); ++i)
            worst = std::max(worst, std::fabs(g.weights[i] - fd[i]) / denom);
    }

    std::ostringstream os;
    os << "max relative gradient error " << worst << " over 100 draws";
    detail = os.str();
    return worst < 1e-5;
}

// ---------------------------------------------------------------------------
// 3. correlation oracle
// ---------------------------------------------------------------------------

bool check_correlation_oracle(std::string& detail) {
    Rng rng(20240101);
    auto random_int_vector = [&](std::size_t n, int lo, int hi) {
        std::vector<double> v(n);
        for (auto& x : v)
            x = static_cast<double>(
                lo + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(hi - lo + 1))));
        return v;
    };
    auto all_equal = [](const std::vector<double>& v) {
        for (double x : v)
            if (x != v[0]) return false;
        return true;
    };

    // brute-force agreement on 1000 tied random vectors
    int done = 0;
    while (done < 1000) {
        std::size_t n = 2 + rng.next_below(11);
        std::vector<double> x = random_int_vector(n, 0, 5);
        std::vector<double> y = random_int_vector(n, 0, 5);
        if (all_equal(x) || all_equal(y)) continue;
        double tau = kendall_tau_b(x, y).coefficient;
        double tau_bf = oracles::kendall_tau_b_bruteforce(x, y);
        if (std::fabs(tau - tau_bf) > 1e-12) {
            detail = "tau mismatch vs brute force: " + std::to_string(tau - tau_bf);
            return false;
        }
        double rho = spearman_rho(x, y).coefficient;
        double rho_bf = oracles::spearman_bruteforce(x, y);
        if (std::fabs(rho - rho_bf) > 1e-12) {
            detail = "rho mismatch vs brute force: " + std::to_string(rho - rho_bf);
            return false;
        }
        ++done;
    }

    // exact permutation p against the analytic approximations
    double worst_k = 0.0, worst_s = 0.0;
    int exact_done = 0;
    while (exact_done < 60) {
        std::size_t nk = 4 + rng.next_below(4);  // kendall: 4..7, ties in y allowed
        std::vector<double> xk(nk);
        std::iota(xk.begin(), xk.end(), 1.0);
        rng.shuffle(xk);
        std::vector<double> yk = random_int_vector(nk, 0, 4);
        if (all_equal(yk)) continue;
        double dk = std::fabs(kendall_tau_b(xk, yk, PMethod::exact_permutation).p_value -
                              kendall_tau_b(xk, yk).p_value);
        worst_k = std::max(worst_k, dk);

        std::size_t ns = 6 + rng.next_below(2);  // spearman: untied, 6..7
        std::vector<double> xs(ns), ys(ns);
        std::iota(xs.begin(), xs.end(), 1.0);
        std::iota(ys.begin(), ys.end(), 1.0);
        rng.shuffle(xs);
        rng.shuffle(ys);
        double ds = std::fabs(spearman_rho(xs, ys, PMethod::exact_permutation).p_value -
                              spearman_rho(xs, ys).p_value);
        worst_s = std::max(worst_s, ds);
        ++exact_done;
    }
    if (worst_k > 0.05 || worst_s > 0.05) {
        detail = "exact-vs-approx p gap: kendall " + std::to_string(worst_k) + ", spearman " +
                 std::to_string(worst_s);
        return false;
    }

    // invariance under strictly increasing transforms
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 3 + rng.next_below(9);
        std::vector<double> x = random_int_vector(n, -3, 3);
        std::vector<double> y = random_int_vector(n, -3, 3);
        if (all_equal(x) || all_equal(y)) continue;
        std::vector<double> xe(n), ya(n);
        for (std::size_t i = 0; i < n; ++i) {
            xe[i] = std::exp(x[i]);
            ya[i] = 3.0 * y[i] + 11.0;
        }
        if (std::fabs(kendall_tau_b(xe, ya).coefficient - kendall_tau_b(x, y).coefficient) >
                1e-12 ||
            std::fabs(spearman_rho(xe, ya).coefficient - spearman_rho(x, y).coefficient) >
                1e-12 ||
            std::fabs(kendall_tau_b(xe, ya).p_value - kendall_tau_b(x, y).p_value) > 1e-12 ||
            std::fabs(spearman_rho(xe, ya).p_value - spearman_rho(x, y).p_value) > 1e-12) {
            detail = "monotone-transform invariance violated";
            return false;
        }
    }

    std::ostringstream os;
    os << "1000 oracle matches to 1e-12; exact-p gaps kendall " << worst_k << ", spearman "
       << worst_s;
    detail = os.str();
    return true;
}

// ---------------------------------------------------------------------------
// 4. metric sanity
// ---------------------------------------------------------------------------

bool check_metric_sanity(std::string& detail) {
    std::string text = "the heart size is normal and both lungs remain clear today";
    if (std::fabs(bleu4(text, {text}).value - 1.0) > 1e-12) {
        detail = "bleu4 on identical text is not 1";
        return false;
    }
    if (std::fabs(rouge_l(text, text).value - 1.0) > 1e-12) {
        detail = "rouge_l on identical text is not 1";
        return false;
    }
    if (meteor_lite(text, text).value < 0.99) {
        detail = "meteor on identical text below 0.99";
        return false;
    }
    std::string a = "alpha beta gamma delta epsilon";
    std::string b = "zeta eta theta iota kappa";
    if (bleu4(a, {b}).value > 1e-8 || rouge_l(a, b).value > 1e-8 || meteor_lite(a, b).value > 1e-8) {
        detail = "disjoint-text metric above 1e-8";
        return false;
    }

    Rng rng(77);
    const char* vocab[] = {"a", "b", "c"};
    for (int trial = 0; trial < 500; ++trial) {
        TokenSequence s, t;
        std::size_t sl = rng.next_below(13), tl = rng.next_below(13);
        for (std::size_t i = 0; i < sl; ++i) s.push_back(vocab[rng.next_below(3)]);
        for (std::size_t i = 0; i < tl; ++i) t.push_back(vocab[rng.next_below(3)]);
        if (lcs_length(s, t) != oracles::lcs_exhaustive(s, t)) {
            detail = "lcs mismatch vs exhaustive subsequences at trial " + std::to_string(trial);
            return false;
        }
    }

    IdfTable idf = build_idf({text, "unrelated filler words everywhere in this other document"});
    double c = cider(text, {text}, idf).value;
    if (std::fabs(c - 10.0) > 1e-9) {
        detail = "cider on identical text with nonzero idf: " + std::to_string(c);
        return false;
    }

    detail = "endpoints exact; 500 LCS oracle matches";
    return true;
}

// ---------------------------------------------------------------------------
// 5 + 6. desk-scale training target and alignment ordering
// ---------------------------------------------------------------------------

struct DeskScaleOutcome {
    bool built = false;
    double accuracy = 0.0;
    double tau_mrscore = 0.0;
    double tau_bleu = 0.0, tau_rouge = 0.0, tau_meteor = 0.0, tau_cider = 0.0;
    double train_sec = 0.0;
    bool monotone = true;
    std::size_t train_pairs = 0, held_out_pairs = 0, held_out_records = 0;
};

DeskScaleOutcome& desk_scale() {
    static DeskScaleOutcome out = [] {
        DeskScaleOutcome o;
        auto gts = textgen::synthetic_corpus(200, 9001);
        MockBackend backend(314159);
        BuildResult built = build_scoring_dataset(gts, backend);
        if (built.records.size() != 600) return o;

        // 80/20 split on ground-truth ids
        std::set<std::string> train_ids;
        for (std::size_t i = 0; i < 160; ++i) train_ids.insert(gts[i].gt_id);
        std::vector<ScoredReport> train_records, held_records;
        for (const auto& r : built.records)
            (train_ids.count(r.report.gt_id) ? train_records : held_records).push_back(r);

        std::vector<ReportPair> train_pairs = make_pairs(train_records);
        std::vector<ReportPair> held_pairs = make_pairs(held_records);
        o.train_pairs = train_pairs.size();
        o.held_out_pairs = held_pairs.size();
        o.held_out_records = held_records.size();

        FeatureConfig fc;  // defaults: dim 4096, orders {1,2}, aux on
        TrainingConfig tc;  // defaults: lr 0.05, 50 epochs, batch 16, l2 1e-4
        tc.seed = 4242;
        std::vector<double> trace;
        tc.epoch_callback = [&trace](int, double loss) { trace.push_back(loss); };

        auto start = std::chrono::steady_clock::now();
        RewardModel model = train(train_pairs, fc, tc);
        o.train_sec = elapsed_sec(start);

        for (std::size_t e = 1; e < trace.size(); ++e)
            if (trace[e] > trace[e - 1] + 1e-6) o.monotone = false;

        o.accuracy = evaluate_ranking(model, held_pairs);

        std::vector<double> human, mrs, bleu, rouge, meteor, cid;
        std::vector<std::string> held_refs;
        for (const auto& r : held_records) held_refs.push_back(r.report.ground_truth);
        IdfTable idf(held_refs);
        for (const auto& r : held_records) {
            const std::string& gt = r.report.ground_truth;
            const std::string& cand = r.report.candidate;
            human.push_back(static_cast<double>(r.total_score));
            mrs.push_back(reward(model, gt, cand));
            bleu.push_back(bleu4(cand, {gt}).value);
            rouge.push_back(rouge_l(cand, gt).value);
            meteor.push_back(meteor_lite(cand, gt).value);
            cid.push_back(cider(cand, {gt}, idf).value);
        }
        o.tau_mrscore = kendall_tau_b(mrs, human).coefficient;
        o.tau_bleu = kendall_tau_b(bleu, human).coefficient;
        o.tau_rouge = kendall_tau_b(rouge, human).coefficient;
        o.tau_meteor = kendall_tau_b(meteor, human).coefficient;
        o.tau_cider = kendall_tau_b(cid, human).coefficient;
        o.built = true;
        return o;
    }();
    return out;
}

bool check_training_target(std::string& detail) {
    DeskScaleOutcome& o = desk_scale();
    if (!o.built) {
        detail = "mock dataset did not build 600 records";
        return false;
    }
    std::ostringstream os;
    os << "held-out accuracy " << o.accuracy << " on " << o.held_out_pairs << " pairs, tau_b "
       << o.tau_mrscore << " on " << o.held_out_records << " records, train " << o.train_sec
       << " s, loss trace " << (o.monotone ? "monotone" : "NOT monotone");
    detail = os.str();
    return o.accuracy >= 0.90 && o.tau_mrscore >= 0.6 && o.train_sec < 60.0 && o.monotone;
}

bool check_alignment_ordering(std::string& detail) {
    DeskScaleOutcome& o = desk_scale();
    if (!o.built) {
        detail = "mock dataset did not build 600 records";
        return false;
    }
    std::ostringstream os;
    os << "tau_b: mrscore " << o.tau_mrscore << " vs bleu4 " << o.tau_bleu << ", rouge_l "
       << o.tau_rouge << ", meteor " << o.tau_meteor << ", cider " << o.tau_cider;
    detail = os.str();
    return o.tau_mrscore > o.tau_bleu && o.tau_mrscore > o.tau_rouge &&
           o.tau_mrscore > o.tau_meteor && o.tau_mrscore > o.tau_cider;
}

// ---------------------------------------------------------------------------
// 7. pipeline reproducibility (through the CLI binary)
// ---------------------------------------------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool run_quiet(const std::string& cmd) {
    int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
}

bool check_pipeline_reproducibility(std::string& detail) {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() /
                   ("mrscore_accept_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    struct Cleanup {
        fs::path d;
        ~Cleanup() { fs::remove_all(d); }
    } cleanup{dir};

    // a fresh gt file so the check stands alone
    std::string gt_path = (dir / "gts.jsonl").string();
    {
        auto gts = textgen::synthetic_corpus(12, 777);
        std::vector<Json> rows;
        for (const auto& gt : gts) {
            Json j;
            j["gt_id"] = gt.gt_id;
            j["ground_truth"] = gt.text;
            rows.push_back(j);
        }
        write_jsonl(gt_path, rows);
    }

    const std::string cli = MRSCORE_CLI_PATH;
    auto run_pipeline = [&](const std::string& tag) -> bool {
        std::string d = (dir / ("dataset_" + tag + ".jsonl")).string();
        std::string p = (dir / ("pairs_" + tag + ".jsonl")).string();
        std::string m = (dir / ("model_" + tag + ".json")).string();
        std::string s = (dir / ("scores_" + tag + ".jsonl")).string();
        return run_quiet(cli + " gen-data --gt " + gt_path + " --backend mock --seed 99 --out " +
                         d) &&
               run_quiet(cli + " pairs --dataset " + d + " --out " + p) &&
               run_quiet(cli + " train --pairs " + p + " --out " + m +
                         " --epochs 15 --seed 5") &&
               run_quiet(cli + " mrscore --model " + m + " --dataset " + d + " --out " + s);
    };
    if (!run_pipeline("a") || !run_pipeline("b")) {
        detail = "pipeline command failed";
        return false;
    }

    for (const char* stem : {"dataset", "pairs", "scores"}) {
        std::string fa = (dir / (std::string(stem) + "_a.jsonl")).string();
        std::string fb = (dir / (std::string(stem) + "_b.jsonl")).string();
        if (slurp(fa).empty() || slurp(fa) != slurp(fb)) {
            detail = std::string(stem) + " files differ between runs";
            return false;
        }
    }
    if (slurp((dir / "model_a.json").string()) != slurp((dir / "model_b.json").string())) {
        detail = "model files differ between runs";
        return false;
    }

    // every persisted record must re-pass the rubric recomputation
    std::vector<ScoredReport> records = load_dataset((dir / "dataset_a.jsonl").string());
    for (const auto& r : records) {
        if (!r.errors) {
            detail = "record " + r.report.id + " has no error vector";
            return false;
        }
        if (total_score(*r.errors) != r.total_score) {
            detail = "record " + r.report.id + " fails rubric recomputation";
            return false;
        }
    }

    detail = "2 runs byte-identical across dataset/pairs/model/scores; " +
             std::to_string(records.size()) + " records re-verified";
    return true;
}

// ---------------------------------------------------------------------------
// 8. pair protocol
// ---------------------------------------------------------------------------

bool check_pair_protocol(std::string& detail) {
    auto gts = textgen::synthetic_corpus(60, 31);
    MockBackend backend(606);
    BuildResult built = build_scoring_dataset(gts, backend);
    std::vector<ReportPair> pairs = make_pairs(built.records);

    // expected count: strictly ordered unordered pairs within each gt group
    std::map<std::string, std::vector<int>> scores_by_gt;
    std::map<std::string, std::string> gt_text;
    std::map<std::string, std::set<std::string>> candidates_by_gt;
    for (const auto& r : built.records) {
        scores_by_gt[r.report.gt_id].push_back(r.total_score);
        gt_text[r.report.gt_id] = r.report.ground_truth;
        candidates_by_gt[r.report.gt_id].insert(r.report.candidate);
    }
    std::size_t expected = 0;
    for (const auto& [gt, scores] : scores_by_gt)
        for (std::size_t i = 0; i < scores.size(); ++i)
            for (std::size_t j = i + 1; j < scores.size(); ++j)
                if (scores[i] != scores[j]) ++expected;
    if (pairs.size() != expected) {
        detail = "pair count " + std::to_string(pairs.size()) + " != expected " +
                 std::to_string(expected);
        return false;
    }

    for (const auto& p : pairs) {
        if (p.accepted_score <= p.rejected_score) {
            detail = "non-strict pair in " + p.gt_id;
            return false;
        }
        if (p.margin != (p.accepted_score - p.rejected_score) / 100.0) {
            detail = "margin mismatch in " + p.gt_id;
            return false;
        }
        if (p.margin <= 0.0 || p.margin > 1.0) {
            detail = "margin out of (0,1] in " + p.gt_id;
            return false;
        }
        if (gt_text.at(p.gt_id) != p.ground_truth) {
            detail = "pair ground truth does not match its gt_id";
            return false;
        }
        if (!candidates_by_gt.at(p.gt_id).count(p.accepted) ||
            !candidates_by_gt.at(p.gt_id).count(p.rejected)) {
            detail = "pair candidates not drawn from the gt_id group";
            return false;
        }
    }

    detail = std::to_string(pairs.size()) + " pairs all satisfy the protocol";
    return true;
}

}  // namespace

int main() {
    std::vector<AcceptanceCheck> criteria = {
        {1, "rubric exactness", check_rubric_exactness},
        {2, "loss/gradient fidelity", check_gradient_fidelity},
        {3, "correlation oracle", check_correlation_oracle},
        {4, "metric sanity", check_metric_sanity},
        {5, "desk-scale training target", check_training_target},
        {6, "alignment ordering", check_alignment_ordering},
        {7, "pipeline reproducibility", check_pipeline_reproducibility},
        {8, "pair protocol", check_pair_protocol},
    };

    int failures = 0;
    for (auto& c : criteria) {
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        if (!ok) ++failures;
        std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", c.number,
                    c.name.c_str(), detail.c_str());
        std::fflush(stdout);
    }
    if (failures) std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    else std::printf("all %zu criteria passed\n", criteria.size());
    return failures == 0 ? 0 : 1;
}
