//! Onboard memory-address bookkeeping.
//!
//! Each satellite owns a fixed ring of storage slots. Captures take slots in
//! ring order; playback follows allocation order, which a monotone sequence
//! number records so that releases in the middle never reorder the rest.

use serde::{Deserialize, Serialize};

use crate::model::{AddressSlot, SlotState};

pub const DEFAULT_SLOT_COUNT: usize = 64;
pub const ADDRESS_BASE: u32 = 0x0010_0000;
pub const ADDRESS_STRIDE: u32 = 0x0004_0000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AddressError {
    #[error("only {free} of {wanted} address slots are free")]
    NoFreeAddressSlots { wanted: usize, free: usize },
    #[error("address {0} is not allocated")]
    SlotNotAllocated(String),
    #[error("address {0} does not exist")]
    UnknownAddress(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddressRegistry {
    slots: Vec<AddressSlot>,
    cursor: usize,
    next_seq: u64,
}

impl Default for AddressRegistry {
    fn default() -> Self {
        AddressRegistry::new(DEFAULT_SLOT_COUNT)
    }
}

impl AddressRegistry {
    pub fn new(slot_count: usize) -> Self {
        let slots = (0..slot_count)
            .map(|i| AddressSlot {
                address: format!("{:08X}", ADDRESS_BASE + ADDRESS_STRIDE * i as u32),
                state: SlotState::Free,
            })
            .collect();
        AddressRegistry {
            slots,
            cursor: 0,
            next_seq: 0,
        }
    }

    pub fn slots(&self) -> &[AddressSlot] {
        &self.slots
    }

    pub fn free_count(&self) -> usize {
        self.slots.iter().filter(|s| s.state == SlotState::Free).count()
    }

    /// Takes `count` free slots for `session_id`, all or nothing.
    pub fn allocate(&mut self, session_id: &str, count: usize) -> Result<Vec<String>, AddressError> {
        let free = self.free_count();
        if free < count {
            return Err(AddressError::NoFreeAddressSlots { wanted: count, free });
        }
        let n = self.slots.len();
        let mut taken = Vec::with_capacity(count);
        let mut i = self.cursor;
        while taken.len() < count {
            let slot = &mut self.slots[i % n];
            if slot.state == SlotState::Free {
                slot.state = SlotState::Allocated {
                    session_id: session_id.to_string(),
                    seq: self.next_seq,
                };
                self.next_seq += 1;
                taken.push(slot.address.clone());
            }
            i += 1;
        }
        self.cursor = i % n;
        Ok(taken)
    }

    /// Addresses still awaiting playback, oldest capture first.
    pub fn playback_queue(&self) -> Vec<String> {
        let mut pending: Vec<(u64, &str)> = self
            .slots
            .iter()
            .filter_map(|s| match &s.state {
                SlotState::Allocated { seq, .. } => Some((*seq, s.address.as_str())),
                _ => None,
            })
            .collect();
        pending.sort_unstable();
        pending.into_iter().map(|(_, a)| a.to_string()).collect()
    }

    pub fn addresses_for(&self, session_id: &str) -> Vec<String> {
        let mut owned: Vec<(u64, &str)> = self
            .slots
            .iter()
            .filter_map(|s| match &s.state {
                SlotState::Allocated { session_id: owner, seq } | SlotState::Downlinked { session_id: owner, seq }
                    if owner == session_id =>
                {
                    Some((*seq, s.address.as_str()))
                }
                _ => None,
            })
            .collect();
        owned.sort_unstable();
        owned.into_iter().map(|(_, a)| a.to_string()).collect()
    }

    fn slot_mut(&mut self, address: &str) -> Result<&mut AddressSlot, AddressError> {
        self.slots
            .iter_mut()
            .find(|s| s.address.eq_ignore_ascii_case(address))
            .ok_or_else(|| AddressError::UnknownAddress(address.to_string()))
    }

    /// Flags played-back slots; they stay owned until released.
    pub fn mark_downlinked(&mut self, addresses: &[String]) -> Result<(), AddressError> {
        for address in addresses {
            let slot = self.slot_mut(address)?;
            match std::mem::replace(&mut slot.state, SlotState::Free) {
                SlotState::Allocated { session_id, seq } | SlotState::Downlinked { session_id, seq } => {
                    slot.state = SlotState::Downlinked { session_id, seq };
                }
                SlotState::Free => return Err(AddressError::SlotNotAllocated(address.clone())),
            }
        }
        Ok(())
    }

    /// Frees the listed slots, all or nothing.
    pub fn release(&mut self, addresses: &[String]) -> Result<(), AddressError> {
        let mut next = self.clone();
        for address in addresses {
            let slot = next.slot_mut(address)?;
            if slot.state == SlotState::Free {
                return Err(AddressError::SlotNotAllocated(address.clone()));
            }
            slot.state = SlotState::Free;
        }
        *self = next;
        Ok(())
    }

    /// Drops every slot owned by `session_id`.
    pub fn release_session(&mut self, session_id: &str) -> usize {
        let owned = self.addresses_for(session_id);
        self.release(&owned).expect("owned slots are allocated");
        owned.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn addresses_are_fixed_stride_hex() {
        let reg = AddressRegistry::new(3);
        let addrs: Vec<_> = reg.slots().iter().map(|s| s.address.as_str()).collect();
        assert_eq!(addrs, ["00100000", "00140000", "00180000"]);
    }

    #[test]
    fn release_middle_keeps_order() {
        let mut reg = AddressRegistry::new(8);
        let a = reg.allocate("CAP-1", 1).unwrap();
        let b = reg.allocate("CAP-2", 1).unwrap();
        let c = reg.allocate("CAP-3", 1).unwrap();
        reg.release(&b).unwrap();
        assert_eq!(reg.playback_queue(), [a[0].clone(), c[0].clone()]);
    }

    #[test]
    fn ring_cursor_wraps_and_order_follows_allocation() {
        let mut reg = AddressRegistry::new(3);
        let first = reg.allocate("A", 2).unwrap();
        reg.release(&first[..1].to_vec()).unwrap();
        let next = reg.allocate("B", 2).unwrap();
        // Slot 2 comes before the recycled slot 0.
        assert_eq!(next, ["00180000", "00100000"]);
        assert_eq!(reg.playback_queue(), ["00140000", "00180000", "00100000"]);
    }

    #[test]
    fn full_registry_is_all_or_nothing() {
        let mut reg = AddressRegistry::new(2);
        reg.allocate("A", 1).unwrap();
        assert_eq!(
            reg.allocate("B", 2),
            Err(AddressError::NoFreeAddressSlots { wanted: 2, free: 1 })
        );
        assert_eq!(reg.free_count(), 1);
    }

    #[test]
    fn releasing_free_slot_fails_atomically() {
        let mut reg = AddressRegistry::new(4);
        let a = reg.allocate("A", 1).unwrap();
        let err = reg.release(&[a[0].clone(), "00180000".into()]).unwrap_err();
        assert_eq!(err, AddressError::SlotNotAllocated("00180000".into()));
        assert_eq!(reg.playback_queue(), a);
    }

    #[test]
    fn downlinked_slots_leave_the_queue() {
        let mut reg = AddressRegistry::new(4);
        let a = reg.allocate("A", 2).unwrap();
        reg.mark_downlinked(&a[..1]).unwrap();
        assert_eq!(reg.playback_queue(), a[1..]);
        assert_eq!(reg.addresses_for("A"), a);
        assert_eq!(reg.release_session("A"), 2);
        assert_eq!(reg.free_count(), 4);
    }
}
