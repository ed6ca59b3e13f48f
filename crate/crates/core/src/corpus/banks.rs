//! Term banks for the synthetic corpus.
//!
//! Every department owns a set of signature expressions, mostly two- and
//! three-word component names. Constituent words are deliberately shared
//! between departments ("valve", "motor", "cylinder", ...) so that the
//! expression, not the single word, carries the department.

use crate::corpus::Department;

#[derive(Debug, Clone, Copy)]
pub struct DepartmentBank {
    pub department: Department,
    /// Canonical signature expressions, lowercase, single-space separated.
    pub signatures: &'static [&'static str],
}

const BANKS: [DepartmentBank; 16] = [
    DepartmentBank {
        department: Department::Controls,
        signatures: &[
            "upper control",
            "lower control",
            "upper valve",
            "control handle",
            "control cable",
        ],
    },
    DepartmentBank {
        department: Department::Vague,
        signatures: &[
            "unit function",
            "general repair",
            "unit inspection",
            "walk around",
            "customer concern",
        ],
    },
    DepartmentBank {
        department: Department::Harness,
        signatures: &[
            "wire harness",
            "harness connector",
            "harness plug",
            "ground wire",
            "pin connector",
        ],
    },
    DepartmentBank {
        department: Department::Hydraulics,
        signatures: &[
            "hydraulic leak",
            "hydraulic pump",
            "relief valve",
            "hydraulic hose",
            "hydraulic filter",
        ],
    },
    DepartmentBank {
        department: Department::Pto,
        signatures: &[
            "power take off",
            "pto shaft",
            "pto switch",
            "pto pump",
            "pto cable",
        ],
    },
    DepartmentBank {
        department: Department::Boom,
        signatures: &[
            "boom function",
            "upper boom",
            "boom cylinder",
            "boom hose",
            "boom tip",
        ],
    },
    DepartmentBank {
        department: Department::Maintenance,
        signatures: &[
            "pm inspection",
            "annual pm",
            "grease fitting",
            "oil change",
            "filter change",
        ],
    },
    DepartmentBank {
        department: Department::Test,
        signatures: &[
            "dielectric test",
            "load test",
            "insulation test",
            "boom test",
            "stability test",
        ],
    },
    DepartmentBank {
        department: Department::Rotation,
        signatures: &[
            "rotation gearbox",
            "below rotation valve",
            "rotation motor",
            "turntable bearing",
            "rotation bolt",
        ],
    },
    DepartmentBank {
        department: Department::Auger,
        signatures: &[
            "auger teeth",
            "auger motor",
            "auger drive",
            "auger stow",
            "auger shaft",
        ],
    },
    DepartmentBank {
        department: Department::Outrigger,
        signatures: &[
            "outrigger leg",
            "outrigger cylinder",
            "outrigger pad",
            "outrigger valve",
            "outrigger switch",
        ],
    },
    DepartmentBank {
        department: Department::Digger,
        signatures: &[
            "digger derrick",
            "pole guide",
            "digger motor",
            "pole claw",
            "digger cylinder",
        ],
    },
    DepartmentBank {
        department: Department::Body,
        signatures: &[
            "compartment door",
            "door hinge",
            "body panel",
            "tool box",
            "body mount",
        ],
    },
    DepartmentBank {
        department: Department::Chassis,
        signatures: &[
            "brake line",
            "frame rail",
            "rear axle",
            "spring hanger",
            "fuel tank",
        ],
    },
    DepartmentBank {
        department: Department::Electronics,
        signatures: &[
            "controller module",
            "display screen",
            "tilt sensor",
            "circuit board",
            "battery charger",
        ],
    },
    DepartmentBank {
        department: Department::Resale,
        signatures: &[
            "resale inspection",
            "unit prep",
            "decal removal",
            "resale cleanup",
            "paint touch up",
        ],
    },
];

pub fn department_bank(department: Department) -> &'static DepartmentBank {
    &BANKS[department.index()]
}

/// Abbreviated renderings of canonical words. The shipped lexicon maps each
/// variant back to its canonical word.
pub const ABBREVIATIONS: &[(&str, &[&str])] = &[
    ("boom", &["bm"]),
    ("control", &["ctrl", "cntrl", "ctl"]),
    ("upper", &["upr", "uppr"]),
    ("lower", &["lwr"]),
    ("valve", &["vlv", "vlve"]),
    ("hydraulic", &["hyd", "hydr", "hydrl"]),
    ("rotation", &["rot", "rotn"]),
    ("gearbox", &["gbx", "gearbx"]),
    ("motor", &["mtr", "mot"]),
    ("cylinder", &["cyl", "cyln", "cylndr"]),
    ("hose", &["hse"]),
    ("pump", &["pmp"]),
    ("auger", &["aug", "augr"]),
    ("outrigger", &["otr", "outrig"]),
    ("digger", &["diggr", "dgr"]),
    ("switch", &["swt", "swtch"]),
    ("bearing", &["brg", "brng"]),
    ("turntable", &["ttbl", "trntbl"]),
    ("harness", &["harn", "hrns"]),
    ("connector", &["conn", "cnctr"]),
    ("battery", &["batt"]),
    ("sensor", &["sens", "snsr"]),
    ("display", &["disp"]),
    ("module", &["modl"]),
    ("compartment", &["cmpt", "compt"]),
    ("door", &["dr"]),
    ("panel", &["pnl"]),
    ("frame", &["frm"]),
    ("axle", &["axl"]),
    ("line", &["ln"]),
    ("inspection", &["insp", "inspctn"]),
    ("maintenance", &["maint"]),
    ("dielectric", &["dielec", "diel"]),
    ("test", &["tst"]),
    ("power", &["pwr"]),
    ("filter", &["fltr"]),
    ("pressure", &["pres"]),
    ("leak", &["lk"]),
    ("replaced", &["repl", "rplcd"]),
    ("adjusted", &["adj"]),
    ("checked", &["chk", "ck"]),
    ("down", &["dwn", "dn"]),
    ("system", &["sys"]),
    ("shaft", &["shft"]),
    ("cable", &["cbl"]),
    ("handle", &["hndl"]),
    ("circuit", &["crct"]),
    ("board", &["brd"]),
    ("teeth", &["tth"]),
    ("drive", &["drv"]),
    ("resale", &["rsl"]),
    ("inoperable", &["inop"]),
];

pub fn abbreviations_of(word: &str) -> &'static [&'static str] {
    ABBREVIATIONS
        .iter()
        .find(|(w, _)| *w == word)
        .map(|(_, v)| *v)
        .unwrap_or(&[])
}

/// Call-log phrases that carry no department information.
pub const VAGUE_CALL_LOGS: &[&str] = &[
    "service needed",
    "unit failed",
    "needs service",
    "customer called",
    "see notes",
];

/// Complaint words used in call logs next to a component.
pub const SYMPTOMS: &[&str] = &[
    "leaking",
    "inoperable",
    "not working",
    "noise",
    "stuck in the air",
    "broken",
    "slow",
    "intermittent",
    "damaged",
    "down",
];

/// Past-tense work verbs for detail tasks.
pub const ACTIONS: &[&str] = &[
    "replaced",
    "repaired",
    "inspected",
    "adjusted",
    "installed",
    "removed",
    "rebuilt",
    "tightened",
    "cleaned",
    "checked",
];

pub const CONDITIONS: &[&str] = &[
    "worn", "damaged", "cracked", "loose", "new", "bad", "leaking",
];

/// Single words that technicians mention in passing on unrelated jobs.
pub const INCIDENTAL_WORDS: &[&str] = &[
    "boom",
    "rotation",
    "auger",
    "outrigger",
    "digger",
    "pto",
    "hydraulic",
    "harness",
    "valve",
    "motor",
    "cylinder",
    "hose",
    "pump",
    "switch",
    "control",
    "turntable",
    "pole",
    "battery",
    "door",
    "panel",
];

pub const INCIDENTAL_ACTIONS: &[&str] =
    &["checked", "greased", "inspected", "looked at", "verified"];

/// Generic tasks found on any job.
pub const FILLER_TASKS: &[&str] = &[
    "cleaned area",
    "perform test",
    "had to cut off",
    "cut off and replaced damaged area or repair",
    "adjusted system pressure",
    "cleaned up shaft",
    "torqued bolts",
    "checked fluid levels",
    "inspected and cleaned area",
    "parts ordered",
    "returned to service",
    "customer approved repair",
    "unit down",
    "road test ok",
];

pub const GASKET_TASKS: &[&str] = &["replaced gasket", "installed seal", "replaced o ring"];

pub const COMPANIES: &[&str] = &[
    "Valley Power",
    "North Line Services",
    "Sierra Utility",
    "Delta Tree Care",
    "Coastal Electric",
    "Summit Cable",
    "Pioneer Telecom",
    "Bay Area Fleet",
];
