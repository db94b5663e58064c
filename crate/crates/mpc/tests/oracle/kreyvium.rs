//! Deliberately naive bit-level Kreyvium: 1-indexed state cells, explicit
//! shifts, one round at a time. Shared by the engine tests and the
//! acceptance suite.

use prs_mpc::circuit::bytes_to_bits_msb;

struct BitOracle {
    s: [bool; 289],
    kstar: [bool; 128],
    ivstar: [bool; 128],
}

impl BitOracle {
    fn new(key: &[bool], iv: &[bool]) -> Self {
        let mut s = [false; 289];
        for i in 1..=93 {
            s[i] = key[i - 1];
        }
        for i in 94..=177 {
            s[i] = iv[i - 94];
        }
        for i in 178..=221 {
            s[i] = iv[i - 178 + 84];
        }
        for cell in s.iter_mut().take(288).skip(222) {
            *cell = true;
        }
        s[288] = false;
        let mut kstar = [false; 128];
        let mut ivstar = [false; 128];
        for i in 0..128 {
            kstar[127 - i] = key[i];
            ivstar[127 - i] = iv[i];
        }
        let mut o = Self { s, kstar, ivstar };
        for _ in 0..1152 {
            o.round();
        }
        o
    }

    fn round(&mut self) -> bool {
        let s = &self.s;
        let mut t1 = s[66] ^ s[93];
        let mut t2 = s[162] ^ s[177];
        let mut t3 = s[243] ^ s[288] ^ self.kstar[0];
        let z = t1 ^ t2 ^ t3;
        t1 = t1 ^ (s[91] & s[92]) ^ s[171] ^ self.ivstar[0];
        t2 = t2 ^ (s[175] & s[176]) ^ s[264];
        t3 = t3 ^ (s[286] & s[287]) ^ s[69];
        let (t4, t5) = (self.kstar[0], self.ivstar[0]);
        for i in (2..=93).rev() {
            self.s[i] = self.s[i - 1];
        }
        self.s[1] = t3;
        for i in (95..=177).rev() {
            self.s[i] = self.s[i - 1];
        }
        self.s[94] = t1;
        for i in (179..=288).rev() {
            self.s[i] = self.s[i - 1];
        }
        self.s[178] = t2;
        for i in 0..127 {
            self.kstar[i] = self.kstar[i + 1];
            self.ivstar[i] = self.ivstar[i + 1];
        }
        self.kstar[127] = t4;
        self.ivstar[127] = t5;
        z
    }
}

pub fn oracle_stream(key: &[u8; 16], iv: &[u8; 16], n: usize) -> Vec<bool> {
    let mut o = BitOracle::new(&bytes_to_bits_msb(key), &bytes_to_bits_msb(iv));
    (0..n).map(|_| o.round()).collect()
}
