use crate::model::Slot;

#[derive(Debug, Clone, Copy)]
struct Field {
    word: usize,
    shift: u32,
    bits: u32,
    min: i32,
}

/// Fixed-width bit packing of states; a field never straddles two words.
#[derive(Debug, Clone)]
pub struct Packer {
    fields: Vec<Field>,
    words: usize,
}

impl Packer {
    pub fn new(slots: &[Slot]) -> Self {
        let mut fields = Vec::with_capacity(slots.len());
        let (mut word, mut used) = (0usize, 0u32);
        for s in slots {
            let span = (s.max as i64 - s.min as i64) as u64;
            let bits = 64 - span.leading_zeros();
            if used + bits > 64 {
                word += 1;
                used = 0;
            }
            fields.push(Field { word, shift: used, bits, min: s.min });
            used += bits;
        }
        Packer { fields, words: word + 1 }
    }

    pub fn words(&self) -> usize {
        self.words
    }

    pub fn pack(&self, s: &[i32], out: &mut [u64]) {
        out.iter_mut().for_each(|w| *w = 0);
        for (f, &v) in self.fields.iter().zip(s) {
            if f.bits > 0 {
                out[f.word] |= ((v - f.min) as u64) << f.shift;
            }
        }
    }

    pub fn unpack(&self, w: &[u64], out: &mut Vec<i32>) {
        out.clear();
        out.extend(self.fields.iter().map(|f| {
            if f.bits == 0 {
                f.min
            } else {
                let mask = if f.bits == 64 { u64::MAX } else { (1u64 << f.bits) - 1 };
                ((w[f.word] >> f.shift) & mask) as i32 + f.min
            }
        }));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SlotKind;

    fn slot(min: i32, max: i32) -> Slot {
        Slot { name: String::new(), kind: SlotKind::Local(0), min, max, init: min }
    }

    #[test]
    fn round_trips_across_word_boundaries() {
        let slots: Vec<Slot> = (0..40).map(|i| slot(-(i % 3), 7 + i * 5)).collect();
        let p = Packer::new(&slots);
        assert!(p.words() > 1);
        let s: Vec<i32> = slots.iter().enumerate().map(|(i, sl)| if i % 2 == 0 { sl.max } else { sl.min }).collect();
        let mut w = vec![0; p.words()];
        p.pack(&s, &mut w);
        let mut back = Vec::new();
        p.unpack(&w, &mut back);
        assert_eq!(back, s);
    }

    #[test]
    fn constant_slots_take_no_space() {
        let p = Packer::new(&[slot(3, 3), slot(0, 1)]);
        let mut w = vec![0; p.words()];
        p.pack(&[3, 1], &mut w);
        assert_eq!(w, vec![1]);
    }
}
