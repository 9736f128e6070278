//! Trellis of the systematic recursive rate-1/2 code and its Viterbi decoder.
//!
//! State convention: bit `j` of the state word is the register holding the
//! `D^(j+1)`-delayed feedback value, so a step shifts the state left and the
//! new feedback bit enters at the LSB.

use super::CodeSpec;

pub(crate) struct Trellis {
    n_states: usize,
    msg_len: usize,
    memory: usize,
    /// Register taps of the feedback polynomial (f_1..f_m as a state mask).
    fb_taps: u32,
    /// Register taps of the feedforward polynomial (g_1..g_m as a state mask).
    ff_taps: u32,
    /// g_0, the feedforward tap on the current feedback bit.
    ff0: u8,
}

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

impl Trellis {
    pub fn new(code: &CodeSpec) -> Self {
        let m = code.memory();
        // Coefficient of D^i is bit (m - i) of the octal polynomial; register
        // j holds the D^(j+1) term, so tap mask bit j = coefficient D^(j+1).
        let tap_mask = |poly: u32| -> u32 {
            let mut mask = 0u32;
            for j in 0..m {
                if (poly >> (m - (j + 1))) & 1 == 1 {
                    mask |= 1 << j;
                }
            }
            mask
        };
        Trellis {
            n_states: 1 << m,
            msg_len: code.msg_len(),
            memory: m,
            fb_taps: tap_mask(code.feedback()),
            ff_taps: tap_mask(code.feedforward()),
            ff0: ((code.feedforward() >> m) & 1) as u8,
        }
    }

    #[inline]
    fn feedback_parity(&self, state: u32) -> u8 {
        parity(state & self.fb_taps)
    }

    #[inline]
    fn parity_out(&self, state: u32, fb_bit: u8) -> u8 {
        (self.ff0 & fb_bit) ^ parity(state & self.ff_taps)
    }

    #[inline]
    fn next_state(&self, state: u32, fb_bit: u8) -> u32 {
        ((state << 1) | fb_bit as u32) & (self.n_states as u32 - 1)
    }

    /// Next state and (systematic, parity) outputs of the branch taking
    /// feedback bit `fb` out of `state`; the systematic bit is the input that
    /// produces that feedback.
    pub(crate) fn branch_by_feedback(&self, state: u32, fb: u8) -> (u32, u8, u8) {
        let u = fb ^ self.feedback_parity(state);
        (self.next_state(state, fb), u, self.parity_out(state, fb))
    }

    /// Zero-terminated encoding; `2·(msg_len + memory)` output bits.
    pub fn encode(&self, msg: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 * (msg.len() + self.memory));
        let mut state = 0u32;
        for &u in msg {
            let fb = u ^ self.feedback_parity(state);
            out.push(u);
            out.push(self.parity_out(state, fb));
            state = self.next_state(state, fb);
        }
        for _ in 0..self.memory {
            // Tail input chosen so the feedback bit is 0, draining the state.
            let u = self.feedback_parity(state);
            out.push(u);
            out.push(self.parity_out(state, 0));
            state = self.next_state(state, 0);
        }
        debug_assert_eq!(state, 0);
        out
    }

    /// ML decoding of `samples` (length `2·(msg_len + memory)`) received at
    /// amplitude `amp = sqrt(snr)`. Writes the message estimate into `msg`.
    pub fn decode(&self, samples: &[f64], amp: f64, work: &mut Workspace, msg: &mut [u8]) {
        let steps = self.msg_len + self.memory;
        debug_assert_eq!(samples.len(), 2 * steps);
        debug_assert_eq!(msg.len(), self.msg_len);
        let s_count = self.n_states;
        work.reset(steps, s_count);

        let metrics = &mut work.metrics;
        let next_metrics = &mut work.next_metrics;
        let choices = &mut work.choices;

        for step in 0..steps {
            let y_sys = samples[2 * step];
            let y_par = samples[2 * step + 1];
            // Branch metrics for transmitted bits 0/1 against each sample.
            let bm_sys = [
                (y_sys - amp) * (y_sys - amp),
                (y_sys + amp) * (y_sys + amp),
            ];
            let bm_par = [
                (y_par - amp) * (y_par - amp),
                (y_par + amp) * (y_par + amp),
            ];
            let tail = step >= self.msg_len;
            for ns in 0..s_count as u32 {
                let fb = (ns & 1) as u8;
                if tail && fb != 0 {
                    next_metrics[ns as usize] = f64::INFINITY;
                    continue;
                }
                let mut best = f64::INFINITY;
                let mut best_key = (2u8, 0u32);
                let mut best_prev = 0u32;
                for high in 0..2u32 {
                    let prev = (ns >> 1) | (high << (self.memory - 1));
                    let base = metrics[prev as usize];
                    if base == f64::INFINITY {
                        continue;
                    }
                    let u = fb ^ self.feedback_parity(prev);
                    let p = self.parity_out(prev, fb);
                    let m = base + bm_sys[u as usize] + bm_par[p as usize];
                    // Strict ordering with ties toward input bit 0, then the
                    // lower predecessor index, keeps decoding deterministic.
                    let key = (u, prev);
                    if m < best || (m == best && key < best_key) {
                        best = m;
                        best_key = key;
                        best_prev = prev;
                    }
                }
                next_metrics[ns as usize] = best;
                choices[step * s_count + ns as usize] = best_prev as u16;
            }
            std::mem::swap(metrics, next_metrics);
        }

        // Termination forces the survivor ending in state 0.
        let mut state = 0u32;
        for step in (0..steps).rev() {
            let prev = choices[step * s_count + state as usize] as u32;
            if step < self.msg_len {
                let fb = (state & 1) as u8;
                msg[step] = fb ^ self.feedback_parity(prev);
            }
            state = prev;
        }
    }
}

/// Reusable decoder buffers.
pub(crate) struct Workspace {
    metrics: Vec<f64>,
    next_metrics: Vec<f64>,
    choices: Vec<u16>,
}

impl Workspace {
    pub fn new(trellis: &Trellis) -> Self {
        let steps = trellis.msg_len + trellis.memory;
        Workspace {
            metrics: vec![f64::INFINITY; trellis.n_states],
            next_metrics: vec![f64::INFINITY; trellis.n_states],
            choices: vec![0; steps * trellis.n_states],
        }
    }

    fn reset(&mut self, steps: usize, n_states: usize) {
        debug_assert_eq!(self.choices.len(), steps * n_states);
        self.metrics.iter_mut().for_each(|m| *m = f64::INFINITY);
        self.metrics[0] = 0.0;
    }
}
