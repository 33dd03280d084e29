//! Shared test support: a process runner for the binary, hand-built ELF and
//! COFF relocatable objects with known section contents, and an independent
//! object dumper used as the extraction oracle.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn centrifuge(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_centrifuge"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

pub fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A section to plant in a hand-built object.
#[derive(Clone)]
pub struct PlannedSection {
    pub sh_type: u32,
    pub flags: u64,
    pub content: Vec<u8>,
}

impl PlannedSection {
    pub fn code(content: &[u8]) -> Self {
        // SHT_PROGBITS with SHF_ALLOC | SHF_EXECINSTR.
        PlannedSection {
            sh_type: 1,
            flags: 0x6,
            content: content.to_vec(),
        }
    }

    pub fn data(content: &[u8]) -> Self {
        // SHT_PROGBITS with SHF_ALLOC | SHF_WRITE.
        PlannedSection {
            sh_type: 1,
            flags: 0x3,
            content: content.to_vec(),
        }
    }

    pub fn nobits(len: usize) -> Self {
        PlannedSection {
            sh_type: 8,
            flags: 0x3,
            content: vec![0; len],
        }
    }
}

struct Emit {
    buf: Vec<u8>,
    little: bool,
}

impl Emit {
    fn u16(&mut self, v: u16) {
        let b = if self.little {
            v.to_le_bytes()
        } else {
            v.to_be_bytes()
        };
        self.buf.extend_from_slice(&b);
    }
    fn u32(&mut self, v: u32) {
        let b = if self.little {
            v.to_le_bytes()
        } else {
            v.to_be_bytes()
        };
        self.buf.extend_from_slice(&b);
    }
    fn u64(&mut self, v: u64) {
        let b = if self.little {
            v.to_le_bytes()
        } else {
            v.to_be_bytes()
        };
        self.buf.extend_from_slice(&b);
    }
}

/// Builds a minimal relocatable ELF with the planned sections (plus the
/// mandatory null section). Contents are laid out right after the header,
/// in order; the section header table goes last.
pub fn build_elf(class64: bool, little: bool, sections: &[PlannedSection]) -> Vec<u8> {
    let ehsize: usize = if class64 { 64 } else { 52 };
    let shentsize: usize = if class64 { 64 } else { 40 };
    let shnum = sections.len() + 1;

    // Content layout, NOBITS takes no file space.
    let mut offsets = Vec::with_capacity(sections.len());
    let mut cursor = ehsize;
    for s in sections {
        offsets.push(cursor);
        if s.sh_type != 8 {
            cursor += s.content.len();
        }
    }
    let shoff = cursor;

    let mut e = Emit {
        buf: Vec::new(),
        little,
    };
    e.buf.extend_from_slice(&[0x7f, b'E', b'L', b'F']);
    e.buf.push(if class64 { 2 } else { 1 });
    e.buf.push(if little { 1 } else { 2 });
    e.buf.push(1); // EV_CURRENT
    e.buf.extend_from_slice(&[0; 9]);
    e.u16(1); // ET_REL
    e.u16(if class64 { 0x3e } else { 0x03 }); // x86-64 / i386
    e.u32(1);
    if class64 {
        e.u64(0); // entry
        e.u64(0); // phoff
        e.u64(shoff as u64);
        e.u32(0); // flags
        e.u16(64);
        e.u16(0);
        e.u16(0);
        e.u16(shentsize as u16);
        e.u16(shnum as u16);
        e.u16(0);
    } else {
        e.u32(0);
        e.u32(0);
        e.u32(shoff as u32);
        e.u32(0);
        e.u16(52);
        e.u16(0);
        e.u16(0);
        e.u16(shentsize as u16);
        e.u16(shnum as u16);
        e.u16(0);
    }
    assert_eq!(e.buf.len(), ehsize);

    for s in sections {
        if s.sh_type != 8 {
            e.buf.extend_from_slice(&s.content);
        }
    }
    assert_eq!(e.buf.len(), shoff);

    // Null section header.
    for _ in 0..shentsize {
        e.buf.push(0);
    }
    for (s, &off) in sections.iter().zip(offsets.iter()) {
        e.u32(0); // sh_name
        e.u32(s.sh_type);
        if class64 {
            e.u64(s.flags);
            e.u64(0); // addr
            e.u64(off as u64);
            e.u64(s.content.len() as u64);
            e.u32(0);
            e.u32(0);
            e.u64(1);
            e.u64(0);
        } else {
            e.u32(s.flags as u32);
            e.u32(0);
            e.u32(off as u32);
            e.u32(s.content.len() as u32);
            e.u32(0);
            e.u32(0);
            e.u32(1);
            e.u32(0);
        }
    }
    e.buf
}

/// Builds a minimal COFF object. `code_flags` sections get
/// IMAGE_SCN_CNT_CODE; others IMAGE_SCN_CNT_INITIALIZED_DATA.
pub fn build_coff(sections: &[(bool, Vec<u8>)]) -> Vec<u8> {
    let header = 20;
    let table = 40 * sections.len();
    let mut offsets = Vec::new();
    let mut cursor = header + table;
    for (_, content) in sections {
        offsets.push(cursor);
        cursor += content.len();
    }
    let mut e = Emit {
        buf: Vec::new(),
        little: true,
    };
    e.u16(0x8664); // machine
    e.u16(sections.len() as u16);
    e.u32(0); // timestamp
    e.u32(0); // symtab
    e.u32(0); // nsyms
    e.u16(0); // optional header
    e.u16(0); // characteristics
    for (i, (is_code, content)) in sections.iter().enumerate() {
        e.buf.extend_from_slice(b".sec\0\0\0\0");
        e.u32(content.len() as u32); // virtual size
        e.u32(0); // virtual address
        e.u32(content.len() as u32); // raw size
        e.u32(offsets[i] as u32); // raw pointer
        e.u32(0);
        e.u32(0);
        e.u16(0);
        e.u16(0);
        e.u32(if *is_code { 0x0000_0020 } else { 0x0000_0040 });
    }
    for (_, content) in sections {
        e.buf.extend_from_slice(content);
    }
    e.buf
}

// ---------------------------------------------------------------------------
// Independent dumper: a second, separately written parser whose only job is
// to dump executable sections. Shares no code with the library.
// ---------------------------------------------------------------------------

fn rd16(b: &[u8], off: usize, little: bool) -> Option<u16> {
    let s = b.get(off..off + 2)?;
    Some(if little {
        u16::from_le_bytes([s[0], s[1]])
    } else {
        u16::from_be_bytes([s[0], s[1]])
    })
}

fn rd32(b: &[u8], off: usize, little: bool) -> Option<u32> {
    let s = b.get(off..off + 4)?;
    let v = [s[0], s[1], s[2], s[3]];
    Some(if little {
        u32::from_le_bytes(v)
    } else {
        u32::from_be_bytes(v)
    })
}

fn rd64(b: &[u8], off: usize, little: bool) -> Option<u64> {
    let s = b.get(off..off + 8)?;
    let v = [s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]];
    Some(if little {
        u64::from_le_bytes(v)
    } else {
        u64::from_be_bytes(v)
    })
}

/// Reference dump of every PROGBITS+EXECINSTR section, ascending file offset.
pub fn reference_elf_dump(b: &[u8]) -> Option<Vec<u8>> {
    if b.len() < 52 || &b[..4] != b"\x7fELF" {
        return None;
    }
    let class64 = b[4] == 2;
    let little = b[5] == 1;
    let (shoff, entsize, num) = if class64 {
        (
            rd64(b, 0x28, little)? as usize,
            rd16(b, 0x3a, little)? as usize,
            rd16(b, 0x3c, little)? as usize,
        )
    } else {
        (
            rd32(b, 0x20, little)? as usize,
            rd16(b, 0x2e, little)? as usize,
            rd16(b, 0x30, little)? as usize,
        )
    };
    let mut found: Vec<(usize, usize)> = Vec::new();
    for i in 0..num {
        let at = shoff + i * entsize;
        let sh_type = rd32(b, at + 4, little)?;
        let (flags, off, size) = if class64 {
            (
                rd64(b, at + 8, little)?,
                rd64(b, at + 24, little)? as usize,
                rd64(b, at + 32, little)? as usize,
            )
        } else {
            (
                rd32(b, at + 8, little)? as u64,
                rd32(b, at + 16, little)? as usize,
                rd32(b, at + 20, little)? as usize,
            )
        };
        if sh_type == 1 && flags & 4 != 0 && size > 0 {
            if off + size > b.len() {
                return None;
            }
            found.push((off, size));
        }
    }
    found.sort();
    let mut out = Vec::new();
    for (off, size) in found {
        out.extend_from_slice(&b[off..off + size]);
    }
    Some(out)
}

/// Reference dump of every IMAGE_SCN_CNT_CODE section of a COFF object.
pub fn reference_coff_dump(b: &[u8]) -> Option<Vec<u8>> {
    let nsec = rd16(b, 2, true)? as usize;
    let opt = rd16(b, 16, true)? as usize;
    let mut found: Vec<(usize, usize)> = Vec::new();
    for i in 0..nsec {
        let at = 20 + opt + i * 40;
        let size = rd32(b, at + 16, true)? as usize;
        let ptr = rd32(b, at + 20, true)? as usize;
        let flags = rd32(b, at + 36, true)?;
        if flags & 0x20 != 0 && size > 0 && ptr != 0 {
            if ptr + size > b.len() {
                return None;
            }
            found.push((ptr, size));
        }
    }
    found.sort();
    let mut out = Vec::new();
    for (off, size) in found {
        out.extend_from_slice(&b[off..off + size]);
    }
    Some(out)
}
