//! Single-producer single-consumer latest-wins slot.
//!
//! A triple buffer: the producer writes its private slot and publishes it by
//! swapping it with the shared middle slot; the consumer swaps the middle slot
//! with its own when the fresh bit is set. Both sides finish in a bounded
//! number of steps and never allocate.

use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicU8, Ordering};
use std::sync::Arc;

const INDEX: u8 = 0b011;
const FRESH: u8 = 0b100;

struct Shared<T> {
    slots: [UnsafeCell<T>; 3],
    middle: AtomicU8,
}

// Each slot is owned by exactly one side at a time; ownership moves only
// through the atomic swap on `middle`.
unsafe impl<T: Send> Sync for Shared<T> {}

/// Producer half. Not `Clone`: there is exactly one producer.
pub struct Sender<T> {
    shared: Arc<Shared<T>>,
    back: u8,
}

/// Consumer half.
pub struct Receiver<T> {
    shared: Arc<Shared<T>>,
    front: u8,
}

pub fn channel<T: Copy + Send>(initial: T) -> (Sender<T>, Receiver<T>) {
    let shared = Arc::new(Shared {
        slots: [UnsafeCell::new(initial), UnsafeCell::new(initial), UnsafeCell::new(initial)],
        middle: AtomicU8::new(1),
    });
    (
        Sender {
            shared: Arc::clone(&shared),
            back: 0,
        },
        Receiver { shared, front: 2 },
    )
}

impl<T: Copy + Send> Sender<T> {
    /// Publishes `value`, replacing any value the consumer has not taken yet.
    pub fn push(&mut self, value: T) {
        // SAFETY: `back` is owned by this producer until the swap below.
        unsafe { *self.shared.slots[self.back as usize].get() = value };
        let prev = self.shared.middle.swap(self.back | FRESH, Ordering::AcqRel);
        self.back = prev & INDEX;
    }
}

impl<T: Copy + Send> Receiver<T> {
    /// Newest unconsumed value, if any.
    pub fn take(&mut self) -> Option<T> {
        if self.shared.middle.load(Ordering::Acquire) & FRESH == 0 {
            return None;
        }
        let prev = self.shared.middle.swap(self.front, Ordering::AcqRel);
        self.front = prev & INDEX;
        // SAFETY: `front` now belongs to the consumer.
        Some(unsafe { *self.shared.slots[self.front as usize].get() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_until_pushed() {
        let (mut tx, mut rx) = channel(0u64);
        assert_eq!(rx.take(), None);
        tx.push(5);
        assert_eq!(rx.take(), Some(5));
        assert_eq!(rx.take(), None);
    }

    #[test]
    fn latest_wins() {
        let (mut tx, mut rx) = channel(0u64);
        tx.push(1);
        tx.push(2);
        tx.push(3);
        assert_eq!(rx.take(), Some(3));
        assert_eq!(rx.take(), None);
    }

    #[test]
    fn concurrent_values_are_whole_and_ordered() {
        let (mut tx, mut rx) = channel((0u64, 0u64));
        let producer = std::thread::spawn(move || {
            for i in 1..=200_000u64 {
                tx.push((i, i.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
            }
        });
        let mut last = 0;
        loop {
            if let Some((i, check)) = rx.take() {
                assert_eq!(check, i.wrapping_mul(0x9E37_79B9_7F4A_7C15), "torn read");
                assert!(i > last);
                last = i;
                if i == 200_000 {
                    break;
                }
            }
            std::hint::spin_loop();
        }
        producer.join().unwrap();
    }
}
