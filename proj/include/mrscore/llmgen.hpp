#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mrscore/corpus.hpp"
#include "mrscore/jsonl.hpp"
#include "mrscore/rng.hpp"
#include "mrscore/rubric.hpp"
#include "mrscore/textprep.hpp"

namespace mrscore {

// Scoring-dataset generation: prompt templates that encode the rubric, a
// chat-backend contract, a deterministic offline mock that corrupts ground
// truths into tiered candidates, response parsing with strict rubric
// consistency, and the generate-then-score assembly pipeline.

// ---------------------------------------------------------------------------
// Backend contract
// ---------------------------------------------------------------------------

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatParams {
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct BackendError : std::runtime_error {
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages,
                                 const ChatParams& params) = 0;
    virtual Source source_tag() const = 0;
};

// ---------------------------------------------------------------------------
// Quality tiers
// ---------------------------------------------------------------------------

struct TierSpec {
    Tier tier = Tier::high;
    int lo = 70;   // inclusive
    int hi = 100;  // inclusive
};

// Bands partition the integer scores: low [0,40), mid [40,70), high [70,100].
inline TierSpec tier_spec(Tier t) {
    switch (t) {
        case Tier::low: return {Tier::low, 0, 39};
        case Tier::mid: return {Tier::mid, 40, 69};
        default: return {Tier::high, 70, 100};
    }
}

inline Tier tier_of_score(int score) {
    if (score < 0 || score > 100)
        throw std::invalid_argument("score " + std::to_string(score) + " outside [0,100]");
    if (score < 40) return Tier::low;
    if (score < 70) return Tier::mid;
    return Tier::high;
}

inline int tier_distance(int score, const TierSpec& spec) {
    if (score < spec.lo) return spec.lo - score;
    if (score > spec.hi) return score - spec.hi;
    return 0;
}

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

namespace prompts {

inline const char* criterion_guidance(std::size_t i) {
    static const char* guidance[kNumCriteria] = {
        "The report must contain an impression section whose conclusions agree with the "
        "ground truth; a missing or contradictory impression is the most severe defect.",
        "Where an impression is present, it must name the correct organs and describe how "
        "surrounding organs are affected.",
        "Lesions must be tied to the correct anatomy, with location, size, distribution and "
        "density consistent with the ground truth.",
        "Operation history, treatment and family history stated in the ground truth must be "
        "carried over into the report.",
        "The report must cover all findings of the ground truth; omissions and truncation "
        "count against completeness.",
        "Spelling and sentence structure must be clean, with no typographical errors.",
        "Standard medical terminology must be used rather than informal lay wording.",
    };
    return guidance[i];
}

inline std::string rubric_block() {
    RubricWeights w = default_weights();
    std::ostringstream os;
    os << "Scoring rubric (total score = 100 minus the weights of all criteria violated):\n";
    for (std::size_t i = 0; i < kNumCriteria; ++i)
        os << "  - " << kCriterionNames[i] << " (weight " << w[i]
           << "): " << criterion_guidance(i) << "\n";
    return os.str();
}

}  // namespace prompts

// Asks for one candidate report whose rubric score lands inside the tier's
// band. Deterministic text; the ground truth rides between sentinels so
// offline backends can recover it exactly.
inline std::vector<ChatMessage> generation_prompt(const std::string& ground_truth,
                                                  const TierSpec& tier) {
    std::ostringstream system;
    system << "You are an experienced radiologist drafting chest X-ray reports of a "
              "requested quality level.\n"
           << prompts::rubric_block()
           << "Introduce only defects that keep the total score inside the requested band.\n"
              "Output the report text alone, with no commentary.";

    std::ostringstream user;
    user << "Target quality tier: " << to_string(tier.tier) << " (total score " << tier.lo << "-"
         << tier.hi << ").\n"
         << "Ground-truth report:\n<<<GT\n"
         << ground_truth << "\nGT>>>\n"
         << "Write one candidate report for this study at the requested quality tier.";

    return {{"system", system.str()}, {"user", user.str()}};
}

// Asks for a machine-parsable verdict: the seven binary flags plus the
// total, as one JSON object. Includes a worked example of a human
// evaluation to anchor the format.
inline std::vector<ChatMessage> scoring_prompt(const std::string& ground_truth,
                                               const std::string& candidate) {
    std::ostringstream system;
    system << "You evaluate candidate radiology reports against their ground truth.\n"
           << prompts::rubric_block()
           << "Reply with exactly one JSON object holding the seven criterion keys in the "
              "order above, each 0 (no error) or 1 (error), plus \"total_score\" (100 minus "
              "the violated weights) and a short \"rationale\" string.\n"
              "Worked example - ground truth: \"Findings: clear lungs. Impression: no acute "
              "disease.\" candidate: \"Findings: clear lungs.\" The candidate drops the "
              "impression section, every other criterion is satisfied, so a human rater "
              "returns:\n"
              "{\"impression_consistency\":1,\"impression_organ\":0,"
              "\"description_of_lesion\":0,\"clinical_history\":0,\"completeness\":0,"
              "\"grammar\":0,\"medical_terminology\":0,\"total_score\":70,"
              "\"rationale\":\"impression missing\"}";

    std::ostringstream user;
    user << "Ground-truth report:\n<<<GT\n" << ground_truth << "\nGT>>>\n"
         << "Candidate report:\n<<<CANDIDATE\n" << candidate << "\nCANDIDATE>>>\n"
         << "Score the candidate now.";

    return {{"system", system.str()}, {"user", user.str()}};
}

// ---------------------------------------------------------------------------
// Scoring-response parsing
// ---------------------------------------------------------------------------

struct ScoringResponse {
    ErrorVector errors;
    int total_score = 0;
    std::string rationale;
};

struct ScoringParseError : std::runtime_error {
    enum class Kind { no_json, missing_key, flag_domain, score_mismatch };
    ScoringParseError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
    Kind kind;
};

namespace detail {

// First balanced {...} block, brace-counting with string awareness.
inline std::optional<std::string> first_json_object(const std::string& text) {
    std::size_t start = text.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}') {
                if (--depth == 0) return text.substr(start, i - start + 1);
            }
        }
        start = text.find('{', start + 1);
    }
    return std::nullopt;
}

}  // namespace detail

// Extracts the first JSON object from free text, validates the seven flags
// and rejects any reply whose total disagrees with the rubric recomputation.
inline ScoringResponse parse_scoring_response(const std::string& text) {
    auto block = detail::first_json_object(text);
    if (!block)
        throw ScoringParseError(ScoringParseError::Kind::no_json,
                                "no JSON object found in scoring reply");
    Json j;
    try {
        j = Json::parse(*block);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScoringParseError(ScoringParseError::Kind::no_json,
                                std::string("unparsable JSON in scoring reply: ") + e.what());
    }

    ScoringResponse r;
    for (std::size_t i = 0; i < kNumCriteria; ++i) {
        std::string key(kCriterionNames[i]);
        if (!j.contains(key))
            throw ScoringParseError(ScoringParseError::Kind::missing_key,
                                    "scoring reply lacks key '" + key + "'");
        if (!j[key].is_number_integer())
            throw ScoringParseError(ScoringParseError::Kind::flag_domain,
                                    "flag '" + key + "' is not an integer");
        int flag = j[key].get<int>();
        if (flag != 0 && flag != 1)
            throw ScoringParseError(ScoringParseError::Kind::flag_domain,
                                    "flag '" + key + "' must be 0 or 1, got " +
                                        std::to_string(flag));
        r.errors[i] = flag;
    }
    if (!j.contains("total_score") || !j["total_score"].is_number_integer())
        throw ScoringParseError(ScoringParseError::Kind::missing_key,
                                "scoring reply lacks integer 'total_score'");
    r.total_score = j["total_score"].get<int>();
    r.rationale = j.value("rationale", std::string());

    int expected = total_score(r.errors);
    if (expected != r.total_score)
        throw ScoringParseError(ScoringParseError::Kind::score_mismatch,
                                "total_score " + std::to_string(r.total_score) +
                                    " disagrees with rubric recomputation " +
                                    std::to_string(expected));
    return r;
}

// ---------------------------------------------------------------------------
// Deterministic mock generation
// ---------------------------------------------------------------------------

struct MockGenerationError : std::runtime_error {
    explicit MockGenerationError(const std::string& what) : std::runtime_error(what) {}
};

namespace mock {

inline const std::vector<std::pair<std::string, std::string>>& organ_swaps() {
    static const std::vector<std::pair<std::string, std::string>> m = {
        {"heart", "kidney"},       {"cardiac", "renal"},     {"lung", "bowel"},
        {"lungs", "bowels"},       {"pulmonary", "intestinal"}, {"pleural", "peritoneal"},
        {"mediastinal", "pelvic"}, {"mediastinum", "pelvis"}, {"rib", "femur"},
        {"ribs", "femurs"},        {"diaphragm", "bladder"},  {"aorta", "ureter"},
    };
    return m;
}

inline const std::vector<std::pair<std::string, std::string>>& lay_terms() {
    static const std::vector<std::pair<std::string, std::string>> m = {
        {"cardiomegaly", "enlargement"}, {"pneumothorax", "collapse"},
        {"effusion", "fluid"},           {"effusions", "fluids"},
        {"atelectasis", "deflation"},    {"consolidation", "clouding"},
        {"opacity", "shadow"},           {"opacities", "shadows"},
        {"edema", "swelling"},           {"fracture", "break"},
        {"fractures", "breaks"},         {"pneumonia", "infection"},
    };
    return m;
}

inline const std::vector<std::string>& lesion_keywords() {
    static const std::vector<std::string> k = {
        "opacity",    "opacities",     "effusion",  "effusions", "consolidation", "nodule",
        "nodules",    "lesion",        "lesions",   "pneumothorax", "atelectasis", "edema",
        "infiltrate", "infiltrates",   "cardiomegaly", "fracture", "fractures",   "pneumonia",
    };
    return k;
}

inline const std::vector<std::string>& history_keywords() {
    static const std::vector<std::string> k = {
        "history", "prior",    "previous",  "comparison", "postoperative",
        "surgery", "surgical", "chemotherapy", "treatment",
    };
    return k;
}

inline std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> sentences;
    std::string cur;
    for (char c : text) {
        if (c == '.' || c == '?' || c == '!') {
            std::size_t a = cur.find_first_not_of(" \t\n\r");
            if (a != std::string::npos) {
                std::size_t b = cur.find_last_not_of(" \t\n\r");
                sentences.push_back(cur.substr(a, b - a + 1));
            }
            cur.clear();
        } else {
            cur += c;
        }
    }
    std::size_t a = cur.find_first_not_of(" \t\n\r");
    if (a != std::string::npos) {
        std::size_t b = cur.find_last_not_of(" \t\n\r");
        sentences.push_back(cur.substr(a, b - a + 1));
    }
    return sentences;
}

inline std::string join_sentences(const std::vector<std::string>& sentences) {
    std::string out;
    for (const auto& s : sentences) {
        if (!out.empty()) out += ' ';
        out += s;
        out += '.';
    }
    return out;
}

inline bool sentence_has_any(const std::string& sentence, const std::vector<std::string>& words) {
    TokenSequence toks = tokenize(sentence);
    for (const auto& t : toks)
        for (const auto& w : words)
            if (t == w) return true;
    return false;
}

inline bool sentence_mentions_impression(const std::string& sentence) {
    return sentence_has_any(sentence, {"impression"});
}

// Word-level substitution across all sentences; matches on the lowercase
// punctuation-stripped core and keeps the trailing punctuation.
inline int replace_words(std::vector<std::string>& sentences,
                         const std::vector<std::pair<std::string, std::string>>& table) {
    int replaced = 0;
    for (auto& sentence : sentences) {
        std::istringstream in(sentence);
        std::string word, rebuilt;
        while (in >> word) {
            std::size_t lo = 0, hi = word.size();
            while (lo < hi && std::ispunct(static_cast<unsigned char>(word[lo]))) ++lo;
            while (hi > lo && std::ispunct(static_cast<unsigned char>(word[hi - 1]))) --hi;
            std::string core = word.substr(lo, hi - lo);
            std::string lower;
            for (char c : core)
                lower.push_back(
                    static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            for (const auto& [from, to] : table) {
                if (lower == from) {
                    word = word.substr(0, lo) + to + word.substr(hi);
                    ++replaced;
                    break;
                }
            }
            if (!rebuilt.empty()) rebuilt += ' ';
            rebuilt += word;
        }
        sentence = rebuilt;
    }
    return replaced;
}

// Adjacent-letter transposition inside selected long words. Selection is
// a pure function of (word, seed) so simulation and application agree.
inline int inject_typos(std::vector<std::string>& sentences, std::uint64_t seed) {
    int injected = 0;
    int eligible_seen = 0;
    for (auto& sentence : sentences) {
        std::istringstream in(sentence);
        std::string word, rebuilt;
        while (in >> word) {
            std::size_t lo = 0, hi = word.size();
            while (lo < hi && std::ispunct(static_cast<unsigned char>(word[lo]))) ++lo;
            while (hi > lo && std::ispunct(static_cast<unsigned char>(word[hi - 1]))) --hi;
            bool eligible = hi - lo >= 4 && word[lo + 1] != word[lo + 2];
            if (eligible) {
                ++eligible_seen;
                bool chosen = fnv1a64(word.substr(lo, hi - lo), seed) % 3 == 0;
                if (chosen || (injected == 0 && eligible_seen == 1)) {
                    std::swap(word[lo + 1], word[lo + 2]);
                    ++injected;
                }
            }
            if (!rebuilt.empty()) rebuilt += ' ';
            rebuilt += word;
        }
        sentence = rebuilt;
    }
    return injected;
}

inline bool has_typo_eligible_word(const std::vector<std::string>& sentences) {
    for (const auto& sentence : sentences) {
        std::istringstream in(sentence);
        std::string word;
        while (in >> word) {
            std::size_t lo = 0, hi = word.size();
            while (lo < hi && std::ispunct(static_cast<unsigned char>(word[lo]))) ++lo;
            while (hi > lo && std::ispunct(static_cast<unsigned char>(word[hi - 1]))) --hi;
            if (hi - lo >= 4 && word[lo + 1] != word[lo + 2]) return true;
        }
    }
    return false;
}

inline bool table_source_present(const std::vector<std::string>& sentences,
                                 const std::vector<std::pair<std::string, std::string>>& table) {
    for (const auto& sentence : sentences) {
        TokenSequence toks = tokenize(sentence);
        for (const auto& t : toks)
            for (const auto& [from, to] : table)
                if (t == from) return true;
    }
    return false;
}

// Applies the corruption for one criterion in place. Returns false when the
// corruption is no longer applicable to the current text.
inline bool apply_corruption(Criterion c, std::vector<std::string>& sentences,
                             std::uint64_t seed) {
    switch (c) {
        case Criterion::impression_consistency: {
            std::vector<std::string> kept;
            for (const auto& s : sentences)
                if (!sentence_mentions_impression(s)) kept.push_back(s);
            if (kept.size() == sentences.size() || kept.empty()) return false;
            sentences = std::move(kept);
            return true;
        }
        case Criterion::impression_organ:
            return replace_words(sentences, organ_swaps()) > 0;
        case Criterion::description_of_lesion: {
            std::vector<std::string> kept;
            for (const auto& s : sentences)
                if (!sentence_has_any(s, lesion_keywords())) kept.push_back(s);
            if (kept.size() == sentences.size() || kept.empty()) return false;
            sentences = std::move(kept);
            return true;
        }
        case Criterion::clinical_history: {
            std::vector<std::string> kept;
            for (const auto& s : sentences)
                if (!sentence_has_any(s, history_keywords())) kept.push_back(s);
            if (kept.size() == sentences.size() || kept.empty()) return false;
            sentences = std::move(kept);
            return true;
        }
        case Criterion::completeness: {
            // drop the tail of the findings; impression sentences survive so
            // this corruption never doubles as an impression error
            std::vector<std::size_t> body;
            for (std::size_t i = 0; i < sentences.size(); ++i)
                if (!sentence_mentions_impression(sentences[i])) body.push_back(i);
            if (body.size() < 3) return false;
            std::size_t keep = std::max<std::size_t>(1, body.size() * 6 / 10);
            if (keep >= body.size()) keep = body.size() - 1;
            std::vector<std::string> kept;
            std::size_t body_seen = 0;
            for (std::size_t i = 0; i < sentences.size(); ++i) {
                bool is_body = body_seen < body.size() && body[body_seen] == i;
                if (is_body) {
                    if (body_seen < keep) kept.push_back(sentences[i]);
                    ++body_seen;
                } else {
                    kept.push_back(sentences[i]);
                }
            }
            sentences = std::move(kept);
            return true;
        }
        case Criterion::grammar: {
            if (!has_typo_eligible_word(sentences)) return false;
            return inject_typos(sentences, seed) > 0;
        }
        default:
            return replace_words(sentences, lay_terms()) > 0;
    }
}

// Runs the flag set's corruptions in canonical order on a copy; empty
// result or an inapplicable step invalidates the set. A set is also
// invalid when a deletion aimed at another criterion takes the impression
// section with it while the impression flag is down - the injected flags
// must stay truthful.
inline std::optional<std::string> try_flag_set(const std::string& ground_truth, int mask,
                                               std::uint64_t seed) {
    std::vector<std::string> sentences = split_sentences(ground_truth);
    if (sentences.empty()) return std::nullopt;
    bool gt_has_impression = false;
    for (const auto& s : sentences) gt_has_impression |= sentence_mentions_impression(s);

    for (std::size_t i = 0; i < kNumCriteria; ++i) {
        if (!(mask >> i & 1)) continue;
        if (!apply_corruption(static_cast<Criterion>(i), sentences, seed)) return std::nullopt;
        if (sentences.empty()) return std::nullopt;
    }

    bool impression_flagged = mask & 1;
    if (gt_has_impression && !impression_flagged) {
        bool retained = false;
        for (const auto& s : sentences) retained |= sentence_mentions_impression(s);
        if (!retained) return std::nullopt;
    }

    std::string text = join_sentences(sentences);
    if (text.empty()) return std::nullopt;
    return text;
}

}  // namespace mock

// Deterministically corrupts the ground truth with criterion-tagged error
// injections, picking a flag set whose rubric score lands inside the
// requested tier. Pure function of (ground_truth, tier, seed).
inline std::pair<std::string, ErrorVector> mock_generate(const std::string& ground_truth,
                                                         Tier tier, std::uint64_t seed) {
    TierSpec spec = tier_spec(tier);
    RubricWeights weights = default_weights();

    std::vector<int> valid;
    for (int mask = 0; mask < (1 << kNumCriteria); ++mask) {
        int deduction = 0;
        for (std::size_t i = 0; i < kNumCriteria; ++i)
            if (mask >> i & 1) deduction += weights[i];
        int score = 100 - deduction;
        if (score < spec.lo || score > spec.hi) continue;
        if (mock::try_flag_set(ground_truth, mask, seed)) valid.push_back(mask);
    }
    if (valid.empty())
        throw MockGenerationError("ground truth cannot be corrupted into tier '" +
                                  to_string(tier) + "': " + ground_truth.substr(0, 60));

    Rng rng(mix_seed(seed, 0x67656e32ull));
    int mask = valid[rng.next_below(valid.size())];
    std::string candidate = *mock::try_flag_set(ground_truth, mask, seed);
    ErrorVector flags;
    for (std::size_t i = 0; i < kNumCriteria; ++i) flags[i] = mask >> i & 1;
    return {std::move(candidate), flags};
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

namespace mock {

inline std::optional<std::string> extract_block(const std::string& text, const std::string& open,
                                                const std::string& close) {
    std::size_t a = text.find(open);
    if (a == std::string::npos) return std::nullopt;
    a += open.size();
    std::size_t b = text.find(close, a);
    if (b == std::string::npos) return std::nullopt;
    return text.substr(a, b - a);
}

// Comparison-based flag detection for candidates the mock did not itself
// generate. Approximate by construction, exact on this mock's own
// corruption vocabulary.
inline ErrorVector detect_flags(const std::string& ground_truth, const std::string& candidate) {
    ErrorVector flags;
    TokenSequence gt = tokenize(ground_truth);
    TokenSequence cand = tokenize(candidate);
    auto has = [](const TokenSequence& toks, const std::string& w) {
        return std::find(toks.begin(), toks.end(), w) != toks.end();
    };

    if (has(gt, "impression") && !has(cand, "impression"))
        flags.set(Criterion::impression_consistency);

    for (const auto& [from, to] : organ_swaps())
        if (has(gt, from) && has(cand, to) && !has(gt, to)) {
            flags.set(Criterion::impression_organ);
            break;
        }

    for (const auto& kw : lesion_keywords())
        if (has(gt, kw) && !has(cand, kw)) {
            flags.set(Criterion::description_of_lesion);
            break;
        }

    for (const auto& kw : history_keywords())
        if (has(gt, kw) && !has(cand, kw)) {
            flags.set(Criterion::clinical_history);
            break;
        }

    if (cand.size() * 10 < gt.size() * 7) flags.set(Criterion::completeness);

    // grammar: candidate token that is an adjacent transposition of a
    // ground-truth token
    for (const auto& ct : cand) {
        if (ct.size() < 4 || has(gt, ct)) continue;
        for (const auto& gtt : gt) {
            if (gtt.size() != ct.size() || gtt == ct) continue;
            for (std::size_t i = 0; i + 1 < ct.size(); ++i) {
                std::string swapped = ct;
                std::swap(swapped[i], swapped[i + 1]);
                if (swapped == gtt) {
                    flags.set(Criterion::grammar);
                    break;
                }
            }
            if (flags[Criterion::grammar]) break;
        }
        if (flags[Criterion::grammar]) break;
    }

    for (const auto& [from, to] : lay_terms())
        if (has(cand, to) && has(gt, from) && !has(gt, to)) {
            flags.set(Criterion::medical_terminology);
            break;
        }

    return flags;
}

}  // namespace mock

// Offline stand-in for a chat LLM: a pure function of (messages, seed).
// Generation prompts are answered by mock_generate; scoring prompts are
// answered by regenerating all tiers and reading off the injected flags,
// falling back to comparison-based detection for foreign candidates.
class MockBackend : public ChatBackend {
  public:
    explicit MockBackend(std::uint64_t seed) : seed_(seed) {}

    Source source_tag() const override { return Source::mock; }

    std::string complete(const std::vector<ChatMessage>& messages,
                         const ChatParams& params) override {
        (void)params;
        std::string text;
        for (const auto& m : messages) {
            text += m.content;
            text += '\n';
        }

        auto gt = mock::extract_block(text, "<<<GT\n", "\nGT>>>");
        if (!gt) return "mock backend: prompt carries no ground truth block";

        auto candidate = mock::extract_block(text, "<<<CANDIDATE\n", "\nCANDIDATE>>>");
        if (candidate) return score_reply(*gt, *candidate);

        Tier tier = Tier::high;
        if (text.find("Target quality tier: low") != std::string::npos) tier = Tier::low;
        else if (text.find("Target quality tier: mid") != std::string::npos) tier = Tier::mid;
        return mock_generate(*gt, tier, per_call_seed(*gt, tier)).first;
    }

  private:
    std::uint64_t per_call_seed(const std::string& gt, Tier tier) const {
        return mix_seed(mix_seed(seed_, fnv1a64(gt)), static_cast<std::uint64_t>(tier));
    }

    std::string score_reply(const std::string& gt, const std::string& candidate) const {
        ErrorVector flags;
        bool matched = false;
        for (Tier t : {Tier::low, Tier::mid, Tier::high}) {
            try {
                auto [regen, regen_flags] = mock_generate(gt, t, per_call_seed(gt, t));
                if (regen == candidate) {
                    flags = regen_flags;
                    matched = true;
                    break;
                }
            } catch (const MockGenerationError&) {
                // tier unreachable for this ground truth; keep probing
            }
        }
        if (!matched) flags = mock::detect_flags(gt, candidate);

        int total = total_score(flags);
        Json j;
        for (std::size_t i = 0; i < kNumCriteria; ++i)
            j[std::string(kCriterionNames[i])] = flags[i];
        j["total_score"] = total;
        j["rationale"] = matched ? "recognized generated candidate" : "heuristic comparison";
        return "Evaluation follows.\n" + j.dump() + "\nEnd of evaluation.";
    }

    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

struct GroundTruth {
    std::string gt_id;
    std::string text;
};

struct Rejection {
    std::string gt_id;
    Tier tier = Tier::high;
    std::string reason;  // empty_candidate | unparsable_response | out_of_tier
    std::string detail;
};

struct BuildResult {
    std::vector<ScoredReport> records;
    std::vector<Rejection> rejects;
};

struct BackendUnreachable : std::runtime_error {
    BackendUnreachable(const std::string& what, BuildResult partial_result)
        : std::runtime_error(what), partial(std::move(partial_result)) {}
    BuildResult partial;
};

struct GenOptions {
    std::vector<Tier> tiers = {Tier::low, Tier::mid, Tier::high};
    int parse_retries = 2;
    int max_in_flight = 4;
    double generation_temperature = 0.7;
    double scoring_temperature = 0.0;
    int max_tokens = 1024;
    int tier_tolerance = 10;  // accepted distance from the requested band
};

namespace detail {

struct GenJob {
    std::size_t gt_index;
    Tier tier;
};

struct GenOutcome {
    std::optional<ScoredReport> record;
    std::optional<Rejection> rejection;
    bool backend_failed = false;
    std::string backend_error;
};

inline GenOutcome run_generation_job(const GroundTruth& gt, Tier tier, ChatBackend& backend,
                                     const GenOptions& options) {
    GenOutcome out;
    TierSpec spec = tier_spec(tier);
    Rejection rej;
    rej.gt_id = gt.gt_id;
    rej.tier = tier;

    try {
        std::string candidate = backend.complete(
            generation_prompt(gt.text, spec),
            {options.generation_temperature, options.max_tokens});
        // trim
        std::size_t a = candidate.find_first_not_of(" \t\r\n");
        std::size_t b = candidate.find_last_not_of(" \t\r\n");
        candidate = a == std::string::npos ? std::string() : candidate.substr(a, b - a + 1);

        if (candidate.empty()) {
            rej.reason = "empty_candidate";
            out.rejection = rej;
            return out;
        }

        std::optional<ScoringResponse> score;
        std::string last_parse_error;
        for (int attempt = 0; attempt <= options.parse_retries && !score; ++attempt) {
            std::string reply = backend.complete(scoring_prompt(gt.text, candidate),
                                                 {options.scoring_temperature, options.max_tokens});
            try {
                score = parse_scoring_response(reply);
            } catch (const ScoringParseError& e) {
                last_parse_error = e.what();
            }
        }
        if (!score) {
            rej.reason = "unparsable_response";
            rej.detail = last_parse_error;
            out.rejection = rej;
            return out;
        }

        if (tier_distance(score->total_score, spec) > options.tier_tolerance) {
            rej.reason = "out_of_tier";
            rej.detail = "score " + std::to_string(score->total_score) + " outside " +
                         to_string(tier) + " band by more than " +
                         std::to_string(options.tier_tolerance);
            out.rejection = rej;
            return out;
        }

        ScoredReport record;
        record.report.id = gt.gt_id + "-" + to_string(tier);
        record.report.gt_id = gt.gt_id;
        record.report.ground_truth = gt.text;
        record.report.candidate = candidate;
        record.report.tier = tier;
        record.report.source = backend.source_tag();
        record.errors = score->errors;
        record.total_score = score->total_score;
        record.scorer = backend.source_tag() == Source::mock ? Scorer::mock : Scorer::llm;
        validate(record);
        out.record = std::move(record);
    } catch (const BackendError& e) {
        out.backend_failed = true;
        out.backend_error = e.what();
    } catch (const MockGenerationError& e) {
        rej.reason = "empty_candidate";
        rej.detail = e.what();
        out.rejection = rej;
    }
    return out;
}

}  // namespace detail

// For each ground truth and tier: generate a candidate, score it with the
// same backend, keep it only if the reply parses and lands near the
// requested band. Jobs may run concurrently up to max_in_flight; results
// are assembled in (gt, tier) order regardless of completion order. A dead
// backend aborts with the partial result attached.
inline BuildResult build_scoring_dataset(const std::vector<GroundTruth>& ground_truths,
                                         ChatBackend& backend, const GenOptions& options = {}) {
    if (ground_truths.empty())
        throw std::invalid_argument("build_scoring_dataset needs at least one ground truth");
    if (options.tiers.empty()) throw std::invalid_argument("no tiers requested");
    {
        std::map<std::string, int> seen;
        for (const auto& gt : ground_truths) {
            if (gt.gt_id.empty()) throw std::invalid_argument("empty gt_id");
            if (gt.text.empty()) throw std::invalid_argument("empty ground truth: " + gt.gt_id);
            if (++seen[gt.gt_id] > 1)
                throw std::invalid_argument("duplicate gt_id: " + gt.gt_id);
        }
    }

    std::vector<detail::GenJob> jobs;
    for (std::size_t i = 0; i < ground_truths.size(); ++i)
        for (Tier t : options.tiers) jobs.push_back({i, t});

    std::vector<detail::GenOutcome> outcomes(jobs.size());
    const int workers = std::max(1, std::min<int>(options.max_in_flight,
                                                  static_cast<int>(jobs.size())));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};

    auto work = [&]() {
        while (!abort.load()) {
            std::size_t k = next.fetch_add(1);
            if (k >= jobs.size()) return;
            outcomes[k] = detail::run_generation_job(ground_truths[jobs[k].gt_index],
                                                     jobs[k].tier, backend, options);
            if (outcomes[k].backend_failed) abort.store(true);
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    BuildResult result;
    std::string backend_error;
    for (const auto& o : outcomes) {
        if (o.record) result.records.push_back(*o.record);
        if (o.rejection) result.rejects.push_back(*o.rejection);
        if (o.backend_failed && backend_error.empty()) backend_error = o.backend_error;
    }
    if (abort.load())
        throw BackendUnreachable("backend unreachable: " + backend_error, std::move(result));
    return result;
}

inline Json to_json(const Rejection& r) {
    Json j;
    j["gt_id"] = r.gt_id;
    j["tier"] = to_string(r.tier);
    j["reason"] = r.reason;
    j["detail"] = r.detail;
    return j;
}

inline std::vector<GroundTruth> load_ground_truths(const std::string& path) {
    std::vector<GroundTruth> gts;
    for_each_jsonl(path, [&](const Json& j, std::size_t line_no) {
        GroundTruth gt;
        try {
            gt.gt_id = j.at("gt_id").get<std::string>();
            gt.text = j.at("ground_truth").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw JsonlError(path, line_no, e.what());
        }
        gts.push_back(std::move(gt));
    });
    return gts;
}

}  // namespace mrscore
