// Bundled vocabularies for names, addresses and hosts.

pub const FIRST_NAMES: &[&str] = &[
    "James", "Mary", "John", "Patricia", "Robert", "Jennifer", "Michael", "Linda", "William",
    "Elizabeth", "David", "Barbara", "Richard", "Susan", "Joseph", "Jessica", "Thomas", "Sarah",
    "Charles", "Karen", "Christopher", "Nancy", "Daniel", "Lisa", "Matthew", "Betty", "Anthony",
    "Margaret", "Mark", "Sandra", "Donald", "Ashley", "Steven", "Kimberly", "Paul", "Emily",
    "Andrew", "Donna", "Joshua", "Michelle", "Kenneth", "Dorothy", "Kevin", "Carol", "Brian",
    "Amanda", "George", "Melissa", "Edward", "Deborah", "Ronald", "Stephanie", "Timothy",
    "Rebecca", "Jason", "Sharon", "Jeffrey", "Laura", "Ryan", "Cynthia", "Jacob", "Kathleen",
    "Gary", "Amy", "Nicholas", "Shirley", "Eric", "Angela", "Jonathan", "Helen", "Stephen",
    "Anna", "Larry", "Brenda", "Justin", "Pamela", "Scott", "Nicole", "Brandon", "Emma",
    "Benjamin", "Samantha", "Samuel", "Katherine", "Frank", "Christine", "Gregory", "Debra",
    "Raymond", "Rachel", "Alexander", "Catherine", "Patrick", "Carolyn", "Jack", "Janet",
    "Dennis", "Ruth", "Jerry", "Maria", "Tyler", "Heather", "Aaron", "Diane", "Jose", "Virginia",
    "Adam", "Julie", "Henry", "Joyce", "Nathan", "Victoria", "Douglas", "Olivia", "Zachary",
    "Kelly", "Peter", "Christina", "Kyle", "Lauren", "Walter", "Joan", "Ethan", "Evelyn",
    "Jeremy", "Judith", "Harold", "Megan", "Keith", "Cheryl", "Christian", "Andrea", "Roger",
    "Hannah", "Noah", "Martha", "Gerald", "Jacqueline", "Carl", "Frances", "Terry", "Gloria",
    "Sean", "Ann", "Austin", "Teresa", "Arthur", "Kathryn", "Lawrence", "Sara", "Jesse", "Janice",
    "Dylan", "Jean", "Bryan", "Alice", "Joe", "Madison", "Jordan", "Doris", "Billy", "Abigail",
    "Bruce", "Julia", "Albert", "Judy", "Willie", "Grace", "Gabriel", "Denise", "Logan", "Amber",
    "Alan", "Marilyn", "Juan", "Beverly", "Wayne", "Danielle", "Roy", "Theresa", "Ralph",
    "Sophia", "Randy", "Marie", "Eugene", "Diana", "Vincent", "Brittany", "Russell", "Natalie",
    "Elijah", "Isabella", "Louis", "Charlotte", "Bobby", "Rose", "Philip", "Alexis", "Johnny",
    "Kayla", "Priya", "Wei", "Mohammed", "Fatima", "Hiroshi", "Yuki", "Carlos", "Sofia", "Ivan",
    "Olga", "Ahmed", "Aisha", "Raj", "Ananya", "Chen", "Mei", "Luca", "Giulia", "Pierre", "Chloe",
];

pub const LAST_NAMES: &[&str] = &[
    "Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis", "Rodriguez",
    "Martinez", "Hernandez", "Lopez", "Gonzalez", "Wilson", "Anderson", "Thomas", "Taylor",
    "Moore", "Jackson", "Martin", "Lee", "Perez", "Thompson", "White", "Harris", "Sanchez",
    "Clark", "Ramirez", "Lewis", "Robinson", "Walker", "Young", "Allen", "King", "Wright",
    "Scott", "Torres", "Nguyen", "Hill", "Flores", "Green", "Adams", "Nelson", "Baker", "Hall",
    "Rivera", "Campbell", "Mitchell", "Carter", "Roberts", "Gomez", "Phillips", "Evans",
    "Turner", "Diaz", "Parker", "Cruz", "Edwards", "Collins", "Reyes", "Stewart", "Morris",
    "Morales", "Murphy", "Cook", "Rogers", "Gutierrez", "Ortiz", "Morgan", "Cooper", "Peterson",
    "Bailey", "Reed", "Kelly", "Howard", "Ramos", "Kim", "Cox", "Ward", "Richardson", "Watson",
    "Brooks", "Chavez", "Wood", "James", "Bennett", "Gray", "Mendoza", "Ruiz", "Hughes", "Price",
    "Alvarez", "Castillo", "Sanders", "Patel", "Myers", "Long", "Ross", "Foster", "Jimenez",
    "Powell", "Jenkins", "Perry", "Russell", "Sullivan", "Bell", "Coleman", "Butler", "Henderson",
    "Barnes", "Gonzales", "Fisher", "Vasquez", "Simmons", "Romero", "Jordan", "Patterson",
    "Alexander", "Hamilton", "Graham", "Reynolds", "Griffin", "Wallace", "Moreno", "West",
    "Cole", "Hayes", "Bryant", "Herrera", "Gibson", "Ellis", "Tran", "Medina", "Aguilar",
    "Stevens", "Murray", "Ford", "Castro", "Marshall", "Owens", "Harrison", "Fernandez",
    "McDonald", "Woods", "Washington", "Kennedy", "Wells", "Vargas", "Henry", "Chen", "Freeman",
    "Webb", "Tucker", "Guzman", "Burns", "Crawford", "Olson", "Simpson", "Porter", "Hunter",
    "Gordon", "Mendez", "Silva", "Shaw", "Snyder", "Mason", "Dixon", "Munoz", "Hunt", "Hicks",
    "Holmes", "Palmer", "Wagner", "Black", "Robertson", "Boyd", "Rose", "Stone", "Salazar", "Fox",
    "Warren", "Mills", "Meyer", "Rice", "Schmidt", "Garza", "Daniels", "Ferguson", "Nichols",
    "Stephens", "Soto", "Weaver", "Ryan", "Gardner", "Payne", "Grant", "Dunn", "Kelley", "Spencer",
    "Hawkins", "Arnold", "Pierce", "Vazquez", "Hansen", "Peters", "Santos", "Hart", "Bradley",
    "Knight", "Elliott", "Cunningham", "Duncan", "Armstrong", "Hudson", "Carroll", "Lane", "Riley",
    "Andrews", "Alvarado", "Ray", "Delgado", "Berry", "Perkins", "Hoffman", "Johnston", "Matthews",
    "OConnor", "Yamamoto", "Kowalski", "Novak", "Ivanov", "Singh", "Wang", "Li", "Zhang", "Okafor",
];

pub const TITLES: &[&str] = &[
    "Mr.", "Mrs.", "Ms.", "Miss", "Dr.", "Prof.", "Gov.", "Sen.", "Rep.", "Rev.", "Hon.", "Capt.",
    "Sgt.", "Gen.", "Col.", "Lt.",
];

pub const STREET_NAMES: &[&str] = &[
    "Main", "Oak", "Pine", "Maple", "Cedar", "Elm", "Washington", "Lake", "Hill", "Park",
    "Walnut", "Sunset", "Lincoln", "Jackson", "Church", "River", "Highland", "Willow", "Forest",
    "Meadow", "Spring", "Ridge", "Center", "Mill", "Franklin", "Jefferson", "Madison", "Adams",
    "Chestnut", "Birch", "Magnolia", "Dogwood", "Hickory", "Sycamore", "Aspen", "Fake", "Market",
    "Broad", "Union", "Prospect", "Summit", "Valley", "Grove", "Cherry", "Laurel", "Harbor",
    "Colonial", "Spruce", "Bay", "Railroad",
];

pub const STREET_SUFFIXES: &[&str] = &[
    "St", "Street", "Ave", "Avenue", "Rd", "Road", "Dr", "Drive", "Ln", "Lane", "Blvd",
    "Boulevard", "Ct", "Court", "Loop", "Circle", "Way", "Pl",
];

pub const UNIT_PREFIXES: &[&str] = &["Apt", "Unit", "Ste", "Bldg", "Rm", "#"];

pub const CITIES: &[&str] = &[
    "Houston", "Dallas", "Austin", "Chicago", "Springfield", "Richmond", "Arlington", "Columbus",
    "Portland", "Denver", "Phoenix", "Seattle", "Boston", "Atlanta", "Miami", "Tampa", "Orlando",
    "Raleigh", "Charlotte", "Nashville", "Memphis", "Louisville", "Madison", "Franklin",
    "Greenville", "Bristol", "Clinton", "Fairview", "Salem", "Georgetown", "Plano", "Irvine",
    "Reno", "Boise", "Omaha", "Tulsa", "Wichita", "Albany", "Trenton", "Dover", "Newark",
    "Baltimore", "Pittsburgh", "Cleveland", "Detroit", "Milwaukee", "Minneapolis", "Sacramento",
    "San Diego", "San Jose", "Los Angeles", "New York", "Kansas City", "Salt Lake City",
];

pub const STATE_CODES: &[&str] = &[
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "DC", "FL", "GA", "HI", "ID", "IL", "IN",
    "IA", "KS", "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH",
    "NJ", "NM", "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT",
    "VT", "VA", "WA", "WV", "WI", "WY",
];

pub const STATE_NAMES: &[&str] = &[
    "Alabama", "Alaska", "Arizona", "Arkansas", "California", "Colorado", "Connecticut",
    "Delaware", "Florida", "Georgia", "Hawaii", "Idaho", "Illinois", "Indiana", "Iowa", "Kansas",
    "Kentucky", "Louisiana", "Maine", "Maryland", "Massachusetts", "Michigan", "Minnesota",
    "Mississippi", "Missouri", "Montana", "Nebraska", "Nevada", "New Hampshire", "New Jersey",
    "New Mexico", "New York", "North Carolina", "North Dakota", "Ohio", "Oklahoma", "Oregon",
    "Pennsylvania", "Rhode Island", "South Carolina", "South Dakota", "Tennessee", "Texas",
    "Utah", "Vermont", "Virginia", "Washington", "West Virginia", "Wisconsin", "Wyoming",
];

pub const DOMAIN_WORDS: &[&str] = &[
    "google", "example", "fake", "acme", "globex", "initech", "umbrella", "contoso", "fabrikam",
    "northwind", "tailspin", "wingtip", "litware", "adatum", "proseware", "mail", "data", "cloud",
    "bank", "finance", "secure", "portal", "api", "docs", "shop", "news", "media", "service",
    "alpha", "beta", "delta", "omega", "zeta", "nova", "apex", "vertex", "summit", "harbor",
];

pub const TLDS: &[&str] = &[
    "com", "org", "net", "edu", "gov", "io", "co", "us", "info", "biz", "dev", "app",
];

pub const PATH_WORDS: &[&str] = &[
    "examples", "index", "home", "api", "v1", "v2", "docs", "search", "login", "account",
    "reports", "files", "images", "static", "users", "help", "about", "products", "download",
];

pub const EMAIL_USERS: &[&str] = &[
    "fake-email", "info", "support", "admin", "contact", "sales", "billing", "noreply", "help",
    "office", "team", "hr", "jobs", "press", "security",
];

pub const MONTHS: &[&str] = &[
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

pub const WEEKDAYS: &[&str] = &[
    "Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday",
];

pub const TIMEZONES: &[&str] = &["PDT", "PST", "EST", "EDT", "CST", "CDT", "MST", "MDT", "UTC", "GMT"];

pub const ORDINAL_WORDS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth", "seventeenth",
    "eighteenth", "nineteenth", "twentieth", "thirtieth", "fortieth", "fiftieth", "hundredth",
];

pub const QUANTITY_UNITS: &[&str] = &[
    "bits", "bytes", "kb", "MB", "GB", "TB", "kg", "g", "lbs", "oz", "km", "m", "cm", "mm", "ft",
    "in", "mi", "ms", "s", "min", "hrs", "days", "mph", "GHz", "Hz", "V", "W", "kW", "L", "ml",
];
