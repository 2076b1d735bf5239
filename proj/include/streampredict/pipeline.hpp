#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace streampredict::pipeline {

using Value = std::variant<std::monostate, bool, std::int64_t, double, std::string>;

struct DataItem {
    std::map<std::string, Value> fields;
    std::uint64_t seq = 0;  // assigned on append
    std::chrono::steady_clock::time_point ingested{};

    DataItem() = default;
    explicit DataItem(std::map<std::string, Value> f) : fields(std::move(f)) {}

    bool has(const std::string& key) const { return fields.contains(key); }
    template <typename T>
    const T& get(const std::string& key) const {
        auto it = fields.find(key);
        if (it == fields.end()) throw std::out_of_range("data item has no field '" + key + "'");
        return std::get<T>(it->second);
    }
};

class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StreamOptions {
    std::size_t capacity = 65536;  // max items appended but not yet read by every reader
    bool truncate = false;         // drop items already consumed by all readers
};

class DataStream;

/// Read-only cursor over a DataStream. Not shareable across threads.
class StreamReader {
public:
    /// Blocks until the next item exists; nullopt once the stream is closed and drained or cancelled.
    std::optional<DataItem> next();
    /// Non-blocking variant: nullopt if nothing is available yet.
    std::optional<DataItem> try_next();
    bool exhausted() const;
    std::uint64_t position() const;

private:
    friend class DataStream;
    StreamReader(std::shared_ptr<DataStream> stream, std::size_t slot) : stream_(std::move(stream)), slot_(slot) {}
    std::shared_ptr<DataStream> stream_;
    std::size_t slot_;
};

/// Append-only, single-writer / multi-reader stream with prefix-consistent reads.
class DataStream : public std::enable_shared_from_this<DataStream> {
public:
    static std::shared_ptr<DataStream> create(std::string owner, StreamOptions options = {});

    /// Owner only. Blocks while the buffer bound is reached; returns false if cancelled.
    bool append(DataItem item);
    void close();
    void cancel();

    StreamReader reader();
    std::uint64_t size() const;
    bool closed() const;
    const std::string& owner() const { return owner_; }
    /// Copy of the retained items (all items unless truncation is enabled).
    std::vector<DataItem> snapshot() const;

private:
    friend class StreamReader;
    DataStream(std::string owner, StreamOptions options) : owner_(std::move(owner)), options_(options) {}

    std::uint64_t min_cursor_locked() const;

    std::string owner_;
    StreamOptions options_;
    mutable std::shared_mutex mu_;
    std::condition_variable_any readable_;
    std::condition_variable_any writable_;
    std::deque<DataItem> items_;
    std::uint64_t base_ = 0;  // sequence number of items_.front()
    std::uint64_t next_seq_ = 0;
    std::deque<std::atomic<std::uint64_t>> cursors_;
    bool closed_ = false;
    bool cancelled_ = false;
};

using StreamPtr = std::shared_ptr<DataStream>;

/// Output handle given to producing terms.
class Emitter {
public:
    explicit Emitter(StreamPtr out) : out_(std::move(out)) {}
    bool emit(DataItem item) { return out_->append(std::move(item)); }

private:
    StreamPtr out_;
};

class Term;
using TermPtr = std::shared_ptr<Term>;

enum class TermKind { kSource, kFunction, kSink, kSequential, kParallel };

class Term {
public:
    explicit Term(std::string name) : name_(std::move(name)) {}
    virtual ~Term() = default;
    Term(const Term&) = delete;
    Term& operator=(const Term&) = delete;

    virtual TermKind kind() const = 0;
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class SourceTerm : public Term {
public:
    using Term::Term;
    TermKind kind() const final { return TermKind::kSource; }
    virtual void produce(Emitter& out, std::stop_token stop) = 0;
};

class FunctionTerm : public Term {
public:
    using Term::Term;
    TermKind kind() const final { return TermKind::kFunction; }
    virtual void process(const DataItem& item, Emitter& out) = 0;
    virtual void finish(Emitter&) {}
    /// Terms accepting several inputs interleave them in arrival order.
    virtual bool accepts_many_inputs() const { return false; }
};

class SinkTerm : public Term {
public:
    using Term::Term;
    TermKind kind() const final { return TermKind::kSink; }
    virtual void consume(const DataItem& item) = 0;
    virtual void finish() {}
};

class SequentialTerm final : public Term {
public:
    SequentialTerm(TermPtr first, TermPtr second);
    TermKind kind() const override { return TermKind::kSequential; }
    const TermPtr& first() const { return first_; }
    const TermPtr& second() const { return second_; }

private:
    TermPtr first_, second_;
};

class ParallelTerm final : public Term {
public:
    ParallelTerm(TermPtr left, TermPtr right);
    TermKind kind() const override { return TermKind::kParallel; }
    const TermPtr& left() const { return left_; }
    const TermPtr& right() const { return right_; }

private:
    TermPtr left_, right_;
};

TermPtr compose_sequential(TermPtr t1, TermPtr t2);
TermPtr compose_parallel(TermPtr t1, TermPtr t2);
inline TermPtr operator*(TermPtr t1, TermPtr t2) { return compose_sequential(std::move(t1), std::move(t2)); }
inline TermPtr operator|(TermPtr t1, TermPtr t2) { return compose_parallel(std::move(t1), std::move(t2)); }

// Library terms.

class VectorSource final : public SourceTerm {
public:
    explicit VectorSource(std::vector<DataItem> items, std::string name = "source")
        : SourceTerm(std::move(name)), items_(std::move(items)) {}
    void produce(Emitter& out, std::stop_token stop) override;

private:
    std::vector<DataItem> items_;
};

class GeneratorSource final : public SourceTerm {
public:
    using Generator = std::function<std::optional<DataItem>()>;
    explicit GeneratorSource(Generator gen, std::string name = "source") : SourceTerm(std::move(name)), gen_(std::move(gen)) {}
    void produce(Emitter& out, std::stop_token stop) override;

private:
    Generator gen_;
};

class MapTerm final : public FunctionTerm {
public:
    using Fn = std::function<std::vector<DataItem>(const DataItem&)>;
    MapTerm(std::string name, Fn fn) : FunctionTerm(std::move(name)), fn_(std::move(fn)) {}
    void process(const DataItem& item, Emitter& out) override;

private:
    Fn fn_;
};

TermPtr identity(std::string name = "identity");

/// Keeps only the listed keys.
class KeyFilter final : public FunctionTerm {
public:
    explicit KeyFilter(std::vector<std::string> keys, std::string name = "key-filter")
        : FunctionTerm(std::move(name)), keys_(std::move(keys)) {}
    void process(const DataItem& item, Emitter& out) override;

private:
    std::vector<std::string> keys_;
};

/// Interleaves all of its inputs in order of arrival.
class MergeTerm final : public FunctionTerm {
public:
    explicit MergeTerm(std::string name = "merge") : FunctionTerm(std::move(name)) {}
    void process(const DataItem& item, Emitter& out) override { out.emit(item); }
    bool accepts_many_inputs() const override { return true; }
};

/// Stores every item it receives; read after join().
class CollectSink final : public SinkTerm {
public:
    explicit CollectSink(std::string name = "collect") : SinkTerm(std::move(name)) {}
    void consume(const DataItem& item) override;
    std::vector<DataItem> items() const;

private:
    mutable std::mutex mu_;
    std::vector<DataItem> items_;
};

class CallbackSink final : public SinkTerm {
public:
    CallbackSink(std::string name, std::function<void(const DataItem&)> fn)
        : SinkTerm(std::move(name)), fn_(std::move(fn)) {}
    void consume(const DataItem& item) override { fn_(item); }

private:
    std::function<void(const DataItem&)> fn_;
};

/// Running pipeline: one thread per leaf term.
class RunHandle {
public:
    RunHandle(RunHandle&&) = default;
    RunHandle& operator=(RunHandle&&) = default;
    ~RunHandle();

    /// Waits for every term; rethrows the first failure raised inside a term.
    void join();
    /// Requests all terms to halt and cancels every stream.
    void stop();

    std::size_t output_count() const { return outputs_.size(); }
    /// Reader over the i-th unconsumed output stream of the pipeline.
    StreamReader& output(std::size_t i) { return outputs_.at(i); }
    const std::vector<StreamPtr>& streams() const { return streams_; }

private:
    friend RunHandle run_pipeline(const TermPtr&, StreamOptions);
    RunHandle() = default;

    TermPtr root_;
    std::vector<StreamPtr> streams_;
    std::vector<StreamReader> outputs_;
    std::vector<std::jthread> threads_;
    std::shared_ptr<std::vector<std::exception_ptr>> errors_;
    std::shared_ptr<std::mutex> errors_mu_;
    bool joined_ = false;
};

/// Validates the term tree (single use of each term, at least one source, arity) and starts it.
RunHandle run_pipeline(const TermPtr& root, StreamOptions options = {});
/// Runs `root` fed from `feed`.
RunHandle run_pipeline(const TermPtr& root, GeneratorSource::Generator feed, StreamOptions options = {});

}  // namespace streampredict::pipeline
