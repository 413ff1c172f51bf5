#include "topostir/parallel.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace topostir {

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_thread_count(unsigned n) { g_threads = n; }

unsigned thread_count()
{
    unsigned n = g_threads.load();
    if(n == 0)
        n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body)
{
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if(workers <= 1) {
        for(std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for(std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers, end = n * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                for(std::size_t i = begin; i < end; ++i)
                    body(i);
            } catch(...) {
                std::lock_guard lock(failure_mutex);
                if(!failure)
                    failure = std::current_exception();
            }
        });
    }
    for(auto& t : pool)
        t.join();
    if(failure)
        std::rethrow_exception(failure);
}

}  // namespace topostir
