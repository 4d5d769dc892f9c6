#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace terse {

/// Root of every exception thrown by the library.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class file_not_found : public error {
  public:
    explicit file_not_found(const std::string& path)
        : error("file not found: " + path), path_(path) {}
    const std::string& path() const { return path_; }

  private:
    std::string path_;
};

/// Malformed input line. Line numbers are 1-based.
class parse_error : public error {
  public:
    parse_error(std::size_t line, const std::string& reason)
        : error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}
    std::size_t line() const { return line_; }
    const std::string& reason() const { return reason_; }

  private:
    std::size_t line_;
    std::string reason_;
};

class empty_corpus : public error {
  public:
    explicit empty_corpus(const std::string& what = "corpus is empty") : error(what) {}
};

class insufficient_records : public error {
  public:
    insufficient_records(std::size_t requested, std::size_t available)
        : error("requested " + std::to_string(requested) + " records, only " +
                std::to_string(available) + " available"),
          requested_(requested), available_(available) {}
    std::size_t requested() const { return requested_; }
    std::size_t available() const { return available_; }

  private:
    std::size_t requested_;
    std::size_t available_;
};

class singular_system : public error {
  public:
    singular_system() : error("normal equations are singular; use a positive ridge lambda") {}
};

class insufficient_data : public error {
  public:
    using error::error;
};

class schema_mismatch : public error {
  public:
    using error::error;
};

class missing_dependency : public error {
  public:
    missing_dependency(const std::string& strategy, const std::string& part)
        : error("strategy " + strategy + " requires " + part), part_(part) {}
    const std::string& part() const { return part_; }

  private:
    std::string part_;
};

class missing_target_length : public error {
  public:
    explicit missing_target_length(const std::string& id)
        : error("record " + id + " has no target length") {}
};

class endpoint_unreachable : public error {
  public:
    using error::error;
};

class http_error : public error {
  public:
    http_error(int status, const std::string& body_excerpt)
        : error("HTTP " + std::to_string(status) + ": " + body_excerpt), status_(status),
          body_(body_excerpt) {}
    int status() const { return status_; }
    const std::string& body_excerpt() const { return body_; }

  private:
    int status_;
    std::string body_;
};

class malformed_response : public error {
  public:
    using error::error;
};

class retries_exhausted : public error {
  public:
    retries_exhausted(int attempts, const std::string& last)
        : error("gave up after " + std::to_string(attempts) + " attempts: " + last),
          attempts_(attempts) {}
    int attempts() const { return attempts_; }

  private:
    int attempts_;
};

class no_sources_configured : public error {
  public:
    no_sources_configured() : error("no power sources configured") {}
};

class source_probe_failed : public error {
  public:
    using error::error;
};

class non_monotonic_time : public error {
  public:
    non_monotonic_time() : error("readings are not strictly increasing in time") {}
};

class window_out_of_range : public error {
  public:
    using error::error;
};

class unknown_record_id : public error {
  public:
    explicit unknown_record_id(const std::string& id) : error("unknown record id: " + id) {}
};

class mismatched_coverage : public error {
  public:
    using error::error;
};

class malformed_model_output : public error {
  public:
    using error::error;
};

class span_out_of_range : public error {
  public:
    using error::error;
};

class empty_report : public error {
  public:
    empty_report() : error("no rows to render") {}
};

class missing_baseline : public error {
  public:
    using error::error;
};

class config_parse_error : public error {
  public:
    using error::error;
};

/// Fatal pipeline failure, tagged with the stage that raised it.
class stage_error : public error {
  public:
    stage_error(const std::string& stage, const std::string& what)
        : error("stage " + stage + ": " + what), stage_(stage) {}
    const std::string& stage() const { return stage_; }

  private:
    std::string stage_;
};

}  // namespace terse
