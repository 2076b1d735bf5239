#include "streampredict/pipeline.hpp"

#include <algorithm>
#include <set>

namespace streampredict::pipeline {

std::shared_ptr<DataStream> DataStream::create(std::string owner, StreamOptions options) {
    if (options.capacity == 0) throw PipelineError("stream capacity must be positive");
    return std::shared_ptr<DataStream>(new DataStream(std::move(owner), options));
}

std::uint64_t DataStream::min_cursor_locked() const {
    std::uint64_t m = next_seq_;
    for (const auto& c : cursors_) m = std::min(m, c.load(std::memory_order_acquire));
    return m;
}

bool DataStream::append(DataItem item) {
    std::unique_lock lock(mu_);
    if (cancelled_) return false;
    if (closed_) throw PipelineError("append to closed stream owned by '" + owner_ + "'");
    writable_.wait(lock, [&] {
        return cancelled_ || cursors_.empty() || next_seq_ - min_cursor_locked() < options_.capacity;
    });
    if (cancelled_) return false;
    item.seq = next_seq_++;
    if (item.ingested == std::chrono::steady_clock::time_point{}) item.ingested = std::chrono::steady_clock::now();
    items_.push_back(std::move(item));
    if (options_.truncate && !cursors_.empty()) {
        const std::uint64_t low = min_cursor_locked();
        while (base_ < low) {
            items_.pop_front();
            ++base_;
        }
    }
    lock.unlock();
    readable_.notify_all();
    return true;
}

void DataStream::close() {
    {
        std::unique_lock lock(mu_);
        closed_ = true;
    }
    readable_.notify_all();
}

void DataStream::cancel() {
    {
        std::unique_lock lock(mu_);
        cancelled_ = true;
        closed_ = true;
    }
    readable_.notify_all();
    writable_.notify_all();
}

StreamReader DataStream::reader() {
    std::unique_lock lock(mu_);
    cursors_.emplace_back(base_);
    return StreamReader(shared_from_this(), cursors_.size() - 1);
}

std::uint64_t DataStream::size() const {
    std::shared_lock lock(mu_);
    return next_seq_;
}

bool DataStream::closed() const {
    std::shared_lock lock(mu_);
    return closed_;
}

std::vector<DataItem> DataStream::snapshot() const {
    std::shared_lock lock(mu_);
    return {items_.begin(), items_.end()};
}

std::optional<DataItem> StreamReader::next() {
    DataStream& s = *stream_;
    std::shared_lock lock(s.mu_);
    const std::uint64_t pos = s.cursors_[slot_].load(std::memory_order_relaxed);
    s.readable_.wait(lock, [&] { return s.next_seq_ > pos || s.closed_; });
    if (s.cancelled_ || s.next_seq_ <= pos) return std::nullopt;
    DataItem item = s.items_[pos - s.base_];
    s.cursors_[slot_].store(pos + 1, std::memory_order_release);
    lock.unlock();
    s.writable_.notify_all();
    return item;
}

std::optional<DataItem> StreamReader::try_next() {
    DataStream& s = *stream_;
    std::shared_lock lock(s.mu_);
    const std::uint64_t pos = s.cursors_[slot_].load(std::memory_order_relaxed);
    if (s.cancelled_ || s.next_seq_ <= pos) return std::nullopt;
    DataItem item = s.items_[pos - s.base_];
    s.cursors_[slot_].store(pos + 1, std::memory_order_release);
    lock.unlock();
    s.writable_.notify_all();
    return item;
}

bool StreamReader::exhausted() const {
    std::shared_lock lock(stream_->mu_);
    return stream_->cancelled_ ||
           (stream_->closed_ && stream_->cursors_[slot_].load(std::memory_order_relaxed) >= stream_->next_seq_);
}

std::uint64_t StreamReader::position() const { return stream_->cursors_[slot_].load(std::memory_order_acquire); }

namespace {

bool has_output(const Term& t) {
    switch (t.kind()) {
        case TermKind::kSink:
            return false;
        case TermKind::kSequential:
            return has_output(*static_cast<const SequentialTerm&>(t).second());
        case TermKind::kParallel: {
            const auto& p = static_cast<const ParallelTerm&>(t);
            return has_output(*p.left()) || has_output(*p.right());
        }
        default:
            return true;
    }
}

bool takes_input(const Term& t) {
    switch (t.kind()) {
        case TermKind::kSource:
            return false;
        case TermKind::kSequential:
            return takes_input(*static_cast<const SequentialTerm&>(t).first());
        case TermKind::kParallel: {
            const auto& p = static_cast<const ParallelTerm&>(t);
            return takes_input(*p.left()) && takes_input(*p.right());
        }
        default:
            return true;
    }
}

}  // namespace

SequentialTerm::SequentialTerm(TermPtr first, TermPtr second)
    : Term("(" + (first ? first->name() : "?") + " * " + (second ? second->name() : "?") + ")"),
      first_(std::move(first)),
      second_(std::move(second)) {
    if (!first_ || !second_) throw PipelineError("cannot compose a null term");
    if (!has_output(*first_)) throw PipelineError("'" + first_->name() + "' has no output to feed '" + second_->name() + "'");
    if (!takes_input(*second_)) throw PipelineError("'" + second_->name() + "' does not accept an input");
}

ParallelTerm::ParallelTerm(TermPtr left, TermPtr right)
    : Term("(" + (left ? left->name() : "?") + " | " + (right ? right->name() : "?") + ")"),
      left_(std::move(left)),
      right_(std::move(right)) {
    if (!left_ || !right_) throw PipelineError("cannot compose a null term");
    if (takes_input(*left_) != takes_input(*right_)) {
        throw PipelineError("parallel branches must accept the same input arity");
    }
}

TermPtr compose_sequential(TermPtr t1, TermPtr t2) { return std::make_shared<SequentialTerm>(std::move(t1), std::move(t2)); }
TermPtr compose_parallel(TermPtr t1, TermPtr t2) { return std::make_shared<ParallelTerm>(std::move(t1), std::move(t2)); }

void VectorSource::produce(Emitter& out, std::stop_token stop) {
    for (const auto& item : items_) {
        if (stop.stop_requested() || !out.emit(item)) return;
    }
}

void GeneratorSource::produce(Emitter& out, std::stop_token stop) {
    while (!stop.stop_requested()) {
        auto item = gen_();
        if (!item || !out.emit(std::move(*item))) return;
    }
}

void MapTerm::process(const DataItem& item, Emitter& out) {
    for (auto& produced : fn_(item)) out.emit(std::move(produced));
}

TermPtr identity(std::string name) {
    return std::make_shared<MapTerm>(std::move(name), [](const DataItem& item) { return std::vector<DataItem>{item}; });
}

void KeyFilter::process(const DataItem& item, Emitter& out) {
    DataItem filtered;
    filtered.ingested = item.ingested;
    for (const auto& k : keys_) {
        if (auto it = item.fields.find(k); it != item.fields.end()) filtered.fields.emplace(k, it->second);
    }
    out.emit(std::move(filtered));
}

void CollectSink::consume(const DataItem& item) {
    std::lock_guard lock(mu_);
    items_.push_back(item);
}

std::vector<DataItem> CollectSink::items() const {
    std::lock_guard lock(mu_);
    return items_;
}

namespace {

using Task = std::function<void(std::stop_token)>;

struct Wiring {
    StreamOptions options;
    std::vector<StreamPtr> streams;
    std::vector<Task> tasks;
    std::set<const Term*> seen;

    StreamPtr new_stream(const Term& owner) {
        streams.push_back(DataStream::create(owner.name(), options));
        return streams.back();
    }
};

// Drains several readers into one callback in arrival order.
void drain_merged(std::vector<StreamReader> readers, const std::function<void(const DataItem&)>& fn, std::stop_token stop) {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<DataItem> queue;
    std::size_t live = readers.size();
    {
        std::vector<std::jthread> feeders;
        for (auto& r : readers) {
            feeders.emplace_back([&, reader = std::move(r)]() mutable {
                while (auto item = reader.next()) {
                    std::lock_guard lock(mu);
                    queue.push_back(std::move(*item));
                    cv.notify_one();
                }
                std::lock_guard lock(mu);
                --live;
                cv.notify_one();
            });
        }
        while (true) {
            std::unique_lock lock(mu);
            cv.wait(lock, [&] { return !queue.empty() || live == 0; });
            if (queue.empty()) break;
            DataItem item = std::move(queue.front());
            queue.pop_front();
            lock.unlock();
            if (!stop.stop_requested()) fn(item);
        }
    }
}

std::vector<StreamPtr> wire(const TermPtr& t, const std::vector<StreamPtr>& inputs, Wiring& w) {
    if (!w.seen.insert(t.get()).second) {
        throw PipelineError("term '" + t->name() + "' appears twice in the pipeline (cycle or shared instance)");
    }
    switch (t->kind()) {
        case TermKind::kSource: {
            if (!inputs.empty()) throw PipelineError("source '" + t->name() + "' cannot take an input");
            auto out = w.new_stream(*t);
            auto* src = static_cast<SourceTerm*>(t.get());
            w.tasks.push_back([src, out](std::stop_token stop) {
                Emitter em(out);
                src->produce(em, stop);
                out->close();
            });
            return {out};
        }
        case TermKind::kFunction: {
            auto* fn = static_cast<FunctionTerm*>(t.get());
            if (inputs.empty()) throw PipelineError("function term '" + t->name() + "' has no upstream source");
            if (inputs.size() > 1 && !fn->accepts_many_inputs()) {
                throw PipelineError("function term '" + t->name() + "' receives " + std::to_string(inputs.size()) +
                                    " streams; insert a merge term");
            }
            auto out = w.new_stream(*t);
            std::vector<StreamReader> readers;
            for (const auto& in : inputs) readers.push_back(in->reader());
            w.tasks.push_back([fn, out, readers = std::move(readers)](std::stop_token stop) mutable {
                Emitter em(out);
                if (readers.size() == 1) {
                    while (!stop.stop_requested()) {
                        auto item = readers.front().next();
                        if (!item) break;
                        fn->process(*item, em);
                    }
                } else {
                    drain_merged(std::move(readers), [&](const DataItem& item) { fn->process(item, em); }, stop);
                }
                if (!stop.stop_requested()) fn->finish(em);
                out->close();
            });
            return {out};
        }
        case TermKind::kSink: {
            if (inputs.size() != 1) throw PipelineError("sink '" + t->name() + "' needs exactly one input");
            auto* sink = static_cast<SinkTerm*>(t.get());
            w.tasks.push_back([sink, reader = inputs.front()->reader()](std::stop_token stop) mutable {
                while (!stop.stop_requested()) {
                    auto item = reader.next();
                    if (!item) break;
                    sink->consume(*item);
                }
                sink->finish();
            });
            return {};
        }
        case TermKind::kSequential: {
            const auto& s = static_cast<const SequentialTerm&>(*t);
            auto mid = wire(s.first(), inputs, w);
            if (mid.empty()) throw PipelineError("'" + s.first()->name() + "' produces no stream");
            return wire(s.second(), mid, w);
        }
        case TermKind::kParallel: {
            const auto& p = static_cast<const ParallelTerm&>(*t);
            auto left = wire(p.left(), inputs, w);
            auto right = wire(p.right(), inputs, w);
            left.insert(left.end(), right.begin(), right.end());
            return left;
        }
    }
    throw PipelineError("unknown term kind");
}

}  // namespace

RunHandle::~RunHandle() {
    if (!joined_ && !threads_.empty()) {
        stop();
        threads_.clear();
    }
}

void RunHandle::join() {
    for (auto& th : threads_) {
        if (th.joinable()) th.join();
    }
    joined_ = true;
    if (errors_) {
        std::lock_guard lock(*errors_mu_);
        if (!errors_->empty()) std::rethrow_exception(errors_->front());
    }
}

void RunHandle::stop() {
    for (auto& th : threads_) th.request_stop();
    for (auto& s : streams_) s->cancel();
}

RunHandle run_pipeline(const TermPtr& root, StreamOptions options) {
    if (!root) throw PipelineError("null pipeline");
    Wiring w;
    w.options = options;
    auto outputs = wire(root, {}, w);

    RunHandle handle;
    handle.root_ = root;
    handle.streams_ = w.streams;
    for (const auto& out : outputs) handle.outputs_.push_back(out->reader());
    handle.errors_ = std::make_shared<std::vector<std::exception_ptr>>();
    handle.errors_mu_ = std::make_shared<std::mutex>();

    auto streams = w.streams;
    auto errors = handle.errors_;
    auto errors_mu = handle.errors_mu_;
    for (auto& task : w.tasks) {
        handle.threads_.emplace_back([task = std::move(task), streams, errors, errors_mu](std::stop_token stop) {
            try {
                task(stop);
            } catch (...) {
                {
                    std::lock_guard lock(*errors_mu);
                    errors->push_back(std::current_exception());
                }
                for (const auto& s : streams) s->cancel();
            }
        });
    }
    return handle;
}

RunHandle run_pipeline(const TermPtr& root, GeneratorSource::Generator feed, StreamOptions options) {
    return run_pipeline(compose_sequential(std::make_shared<GeneratorSource>(std::move(feed), "feed"), root), options);
}

}  // namespace streampredict::pipeline
