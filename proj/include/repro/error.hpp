#pragma once

#include <stdexcept>
#include <string>

namespace repro {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyDocument : Error {
    EmptyDocument() : Error("empty document") {}
};

struct GatewayError : Error {
    using Error::Error;
};

struct ReplayMiss : Error {
    std::string key;
    explicit ReplayMiss(std::string k)
        : Error("replay miss for request key " + k), key(std::move(k)) {}
};

// Carries the raw model text so callers can decide whether to re-prompt.
struct ParseFailure : Error {
    std::string raw;
    ParseFailure(const std::string& what, std::string raw_text)
        : Error(what), raw(std::move(raw_text)) {}
};

struct SpanError : Error {
    using Error::Error;
};

struct StageFailure : Error {
    std::string stage;
    StageFailure(std::string stage_name, const std::string& detail)
        : Error("stage failure [" + stage_name + "]: " + detail),
          stage(std::move(stage_name)) {}
};

struct UngradedLeaf : Error {
    using Error::Error;
};

struct DegenerateWeights : Error {
    using Error::Error;
};

struct EmptyRubric : Error {
    EmptyRubric() : Error("empty rubric") {}
};

}  // namespace repro
