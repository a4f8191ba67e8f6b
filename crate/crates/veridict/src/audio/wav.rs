use crate::error::{Error, Result};

/// Decoded mono PCM audio with samples in [-1, 1].
#[derive(Debug, Clone)]
pub struct PcmSignal {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

const PCM16_SCALE: f64 = 32768.0;

fn read_u16(bytes: &[u8], offset: usize) -> Result<u16> {
    let b = bytes
        .get(offset..offset + 2)
        .ok_or_else(|| Error::format(offset, "truncated (expected u16)"))?;
    Ok(u16::from_le_bytes([b[0], b[1]]))
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let b = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| Error::format(offset, "truncated (expected u32)"))?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parse a RIFF/WAVE container holding 16-bit PCM, mono or stereo.
/// Stereo is downmixed by channel average; values are scaled by 1/32768.
pub fn read_wav(bytes: &[u8]) -> Result<PcmSignal> {
    if bytes.len() < 12 {
        return Err(Error::format(0, "file shorter than RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::format(0, "bad magic (expected RIFF)"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::format(8, "bad form type (expected WAVE)"));
    }

    let mut offset = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<(usize, usize)> = None; // (offset, len)

    while offset + 8 <= bytes.len() {
        let id = &bytes[offset..offset + 4];
        let size = read_u32(bytes, offset + 4)? as usize;
        let body = offset + 8;
        if body + size > bytes.len() {
            return Err(Error::format(
                offset,
                format!("chunk '{}' overruns file", String::from_utf8_lossy(id)),
            ));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::format(body, "fmt chunk too small"));
                }
                let format = read_u16(bytes, body)?;
                let channels = read_u16(bytes, body + 2)?;
                let rate = read_u32(bytes, body + 4)?;
                let bits = read_u16(bytes, body + 14)?;
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some((body, size)),
            _ => {}
        }
        // chunks are word-aligned
        offset = body + size + (size & 1);
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::format(12, "missing fmt chunk"))?;
    if format != 1 {
        return Err(Error::format(12, format!("unsupported encoding {format} (expected PCM=1)")));
    }
    if bits != 16 {
        return Err(Error::format(12, format!("unsupported bit depth {bits} (expected 16)")));
    }
    if channels == 0 || channels > 2 {
        return Err(Error::format(12, format!("unsupported channel count {channels}")));
    }
    if rate == 0 {
        return Err(Error::format(12, "zero sample rate"));
    }
    let (data_off, data_len) = data.ok_or_else(|| Error::format(12, "missing data chunk"))?;
    let bytes_per_frame = 2 * channels as usize;
    if data_len % bytes_per_frame != 0 {
        return Err(Error::format(data_off, "data chunk not a whole number of frames"));
    }

    let n_frames = data_len / bytes_per_frame;
    let mut samples = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut acc = 0.0;
        for c in 0..channels as usize {
            let o = data_off + f * bytes_per_frame + 2 * c;
            let v = i16::from_le_bytes([bytes[o], bytes[o + 1]]);
            acc += v as f64 / PCM16_SCALE;
        }
        samples.push(acc / channels as f64);
    }
    Ok(PcmSignal {
        sample_rate: rate,
        samples,
    })
}

/// Encode a mono signal as 16-bit PCM WAV. Samples are clamped to [-1, 1].
pub fn write_wav_pcm16(signal: &PcmSignal) -> Vec<u8> {
    let n = signal.samples.len();
    let data_len = 2 * n;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&signal.sample_rate.to_le_bytes());
    out.extend_from_slice(&(signal.sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &signal.samples {
        let v = (s.clamp(-1.0, 1.0) * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
