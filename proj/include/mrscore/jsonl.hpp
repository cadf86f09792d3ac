#pragma once

#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mrscore {

// JSON Lines plumbing shared by the dataset, pairs, model and score files.
// Insertion-ordered objects so emitted records keep their documented key
// order and byte-identical reruns stay byte-identical.
using Json = nlohmann::ordered_json;

struct JsonlError : std::runtime_error {
    JsonlError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
          line_number(line) {}
    std::size_t line_number;
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Calls fn(record, line_number) for every non-empty line.
inline void for_each_jsonl(const std::string& path,
                           const std::function<void(const Json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json record;
        try {
            record = Json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw JsonlError(path, line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!record.is_object()) throw JsonlError(path, line_no, "record is not a JSON object");
        fn(record, line_no);
    }
}

inline std::vector<Json> read_jsonl(const std::string& path) {
    std::vector<Json> records;
    for_each_jsonl(path, [&](const Json& r, std::size_t) { records.push_back(r); });
    return records;
}

inline void write_jsonl(const std::string& path, const std::vector<Json>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const auto& r : records) out << r.dump() << '\n';
    if (!out) throw IoError("write failed on " + path);
}

}  // namespace mrscore
