//! Process-level tuning for allocation-heavy training loops.

/// Keeps freed large buffers inside the process heap instead of returning them
/// to the OS. Every layer allocates multi-megabyte activations per call, and
/// re-faulting those pages costs roughly a third of a desk-preset forward pass.
///
/// No-op outside glibc targets.
pub fn retain_heap() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only adjusts allocator thresholds and is called before
    // any concurrent allocation-sensitive work; failures are reported via its
    // return value, which we ignore (the defaults remain in effect).
    unsafe {
        // 32 MiB is the largest mmap threshold glibc accepts on 64-bit targets.
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
    }
}
