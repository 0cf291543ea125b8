#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>

namespace elicit {

struct Transcript;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- llm_backend ---------------------------------------------------------

class BackendError : public Error {
public:
    using Error::Error;
};

/// Network failure, or a retryable status that persisted through every attempt.
class TransportError : public BackendError {
public:
    explicit TransportError(const std::string& what, int status = 0)
        : BackendError(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

class AuthError : public BackendError {
public:
    using BackendError::BackendError;
};

/// The response carried no usable message content.
class SchemaError : public BackendError {
public:
    using BackendError::BackendError;
};

class ScriptExhausted : public BackendError {
public:
    explicit ScriptExhausted(std::string tag)
        : BackendError("script exhausted for tag '" + tag + "'"), tag_(std::move(tag)) {}
    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

class CassetteMiss : public BackendError {
public:
    explicit CassetteMiss(std::string key)
        : BackendError("no cassette entry for request " + key), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyScript : public Error {
public:
    using Error::Error;
};

// --- prompts -------------------------------------------------------------

class PromptError : public Error {
public:
    using Error::Error;
};

class UnknownTemplate : public PromptError {
public:
    explicit UnknownTemplate(const std::string& id) : PromptError("unknown template '" + id + "'") {}
};

class MissingSlot : public PromptError {
public:
    explicit MissingSlot(std::string slot)
        : PromptError("missing slot '" + slot + "'"), slot_(std::move(slot)) {}
    const std::string& slot() const noexcept { return slot_; }

private:
    std::string slot_;
};

class ExtraSlot : public PromptError {
public:
    explicit ExtraSlot(std::string slot)
        : PromptError("unexpected slot '" + slot + "'"), slot_(std::move(slot)) {}
    const std::string& slot() const noexcept { return slot_; }

private:
    std::string slot_;
};

// --- orchestrator --------------------------------------------------------

/// A backend error surfaced by a session. When the failure happened inside a
/// running session, transcript() holds its state with terminated_by = Error.
class BackendFailure : public Error {
public:
    BackendFailure(const std::string& what, std::shared_ptr<const Transcript> transcript = nullptr)
        : Error(what), transcript_(std::move(transcript)) {}
    const std::shared_ptr<const Transcript>& transcript() const noexcept { return transcript_; }

private:
    std::shared_ptr<const Transcript> transcript_;
};

class InvalidConfig : public Error {
public:
    using Error::Error;
};

// --- evaluator -----------------------------------------------------------

class UnscorableTranscript : public Error {
public:
    using Error::Error;
};

class ScoreParseFailure : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

// --- store ---------------------------------------------------------------

class IoError : public Error {
public:
    IoError(const std::string& what, std::string path)
        : Error(what + ": " + path), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class SchemaVersionError : public Error {
public:
    using Error::Error;
};

}  // namespace elicit
