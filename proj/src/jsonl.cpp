#include "guardforge/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "guardforge/util.hpp"

namespace guardforge {

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path);
    }
    std::vector<json> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        json value = json::parse(line, nullptr, false);
        if (value.is_discarded() || !value.is_object()) {
            throw Error(ErrorKind::SchemaMismatch,
                        path + ":" + std::to_string(lineno) + " is not a JSON object");
        }
        records.push_back(std::move(value));
    }
    return records;
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
    std::ostringstream out;
    for (const auto& record : records) {
        out << record.dump() << '\n';
    }
    write_file_atomic(path, out.str());
}

json labels_to_json(const LabelMap& labels) {
    json gold = json::object();
    for (TaskKind task : kAllTasks) {
        auto it = labels.find(task);
        if (it != labels.end() && it->second != Label::Absent) {
            gold[task_name(task)] = label_name(it->second);
        }
    }
    return gold;
}

LabelMap labels_from_json(const json& gold) {
    LabelMap labels;
    if (gold.is_null()) return labels;
    if (!gold.is_object()) {
        throw Error(ErrorKind::SchemaMismatch, "gold must be an object");
    }
    for (const auto& [key, value] : gold.items()) {
        auto task = task_from_name(key);
        if (!task) {
            throw Error(ErrorKind::SchemaMismatch, "unknown task '" + key + "' in gold");
        }
        if (value.is_null()) continue;
        labels[*task] = canonicalize_label(value.get<std::string>(), *task);
    }
    return labels;
}

json sample_to_json(const Sample& sample) {
    json record = json::object();
    record["id"] = sample.id;
    record["prompt"] = sample.prompt;
    if (sample.has_response()) record["response"] = sample.response;
    record["gold"] = labels_to_json(sample.gold);
    record["source"] = sample.source;
    record["adversarial"] = sample.adversarial;
    return record;
}

Sample sample_from_json(const json& record) {
    Sample sample;
    try {
        sample.id = record.at("id").get<std::string>();
        sample.prompt = record.at("prompt").get<std::string>();
        if (record.contains("response") && !record["response"].is_null()) {
            sample.response = record["response"].get<std::string>();
        }
        if (record.contains("gold")) {
            sample.gold = labels_from_json(record["gold"]);
        }
        if (record.contains("source")) sample.source = record["source"].get<std::string>();
        if (record.contains("adversarial")) {
            sample.adversarial = record["adversarial"].get<bool>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::SchemaMismatch,
                    "sample record malformed: " + std::string(e.what()));
    }
    return sample;
}

} // namespace guardforge
